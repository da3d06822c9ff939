"""Finite-horizon laboratory for linear dynamics on Fréchet spaces.

Orbits of shift, diagonal, translation and differential operators on
truncated vectors; return-set densities and Furstenberg families; locally
bounded orbit certificates; empirical invariant measures.
"""

__version__ = "0.1.0"

from .spaces import (  # noqa: E402
    BoundednessCertificate,
    KotheMatrix,
    NeighborhoodSpec,
    SpaceSpec,
    TruncatedVector,
    bounded_certificate,
    in_neighborhood,
    max_modulus,
    polynomial,
    seminorm,
)
from .operators import (  # noqa: E402
    BackwardShift,
    Birkhoff,
    Diagonal,
    DiffOp,
    MacLane,
    Orbit,
    apply,
    eigencheck_diffop,
    orbit,
)
from .densities import (  # noqa: E402
    APb,
    BlockOf,
    LowerDensityPositive,
    ReturnSet,
    StarFamily,
    Syndetic,
    UpperBanachPositive,
    banach_density_curve,
    block_member,
    family_member,
    gen_star_family,
    lower_density_curve,
    sucheston_M,
)
from .recurrence import (  # noqa: E402
    LboCertificate,
    RecurrenceReport,
    classify,
    lbo_falsify,
    lbo_search,
    pushforward_certificate,
    return_set,
    transfer_block_recurrence,
    urec_coverage,
)
from .constructions import (  # noqa: E402
    WordEmbeddingSequence,
    build_star_recurrent,
    build_word_embedding_sequence,
    build_z_from_y,
    phi_length,
)
from .measures import (  # noqa: E402
    EmpiricalMeasure,
    MeasureMixture,
    TestFunctional,
    build_invariant_candidate,
    empirical_measure,
    invariance_defect,
    measure_of_ball,
)
