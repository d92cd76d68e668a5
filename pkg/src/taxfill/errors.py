"""Exception types raised across the package."""


class TaxfillError(Exception):
    """Base class for all package-specific errors."""


class CyclicTaxonomy(TaxfillError):
    """The edge set contains a directed cycle."""


class UnknownConcept(TaxfillError):
    """A concept id was referenced that does not exist in the taxonomy."""


class DuplicateConcept(TaxfillError):
    """A concept id was declared or inserted twice."""


class TaxonomyTooSmall(TaxfillError):
    """The taxonomy has too few concepts for the requested operation."""


class InvalidPosition(TaxfillError):
    """A candidate position violates the descendant precondition."""


class NoContext(TaxfillError):
    """A position has no taxonomic relations to build context from."""


class ShapeError(TaxfillError):
    """Tensor operands have incompatible shapes."""


class UninitializedGradient(TaxfillError):
    """An optimizer step was requested before gradients were populated."""


class EmptySentence(TaxfillError):
    """A relation sentence with no tokens was passed to the encoder."""


class MissingAnchor(TaxfillError):
    """A subgraph does not contain its anchor node."""


class ConfigError(TaxfillError):
    """An unknown or inconsistent configuration value."""


class VocabMismatch(TaxfillError):
    """Two models disagree on vocabulary or encoder dimensions."""


class ExtractionContractViolation(TaxfillError):
    """An extraction method returned a taxonomy breaking its contract."""
