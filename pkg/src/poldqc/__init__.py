"""Double-quantum-coherence 2D infrared spectra of vibrational polaritons.

The pipeline: Morse diatomics coupled to one cavity mode produce
cavity potential-energy surfaces (model), a grid eigensolver relaxes the
lowest polaritonic states in imaginary time (eigen), eigenstates are
decomposed over a symmetrized bare product basis (basis), and the
double-quantum response is evaluated in closed form on a frequency grid
(dqc). The cli module chains the stages through text files.
"""

from .errors import (
    BoundaryLeakError,
    CalibrationError,
    ConvergenceError,
    DegenerateInputError,
    NumericalError,
    ParseError,
    PartitionError,
    PoldqcError,
    ValidationError,
)
from .units import (
    AMU_TO_AU,
    HARTREE_TO_INVCM,
    cm_to_hartree,
    hartree_to_cm,
)
from .grids import (
    Axis,
    ProductGrid,
    Wavefunction,
    apply_diagonal,
    apply_kinetic,
    boundary_leak,
    fft_workers,
    gram_schmidt_deflate,
    hermite_gauss,
    inner_product,
    kinetic_on_array,
    norm,
    normalize,
)
from .model import (
    HF_BOND_LENGTH,
    HF_REDUCED_MASS,
    CavityMode,
    DipoleModel,
    MorseParams,
    SurfaceSet,
    SurfaceVariant,
    build_surface_set,
    calibrate_dipole_slope,
    default_calibration_grid,
    first_order_rabi_cm,
    fit_morse_to_transitions,
    load_surface_set,
    mecke_from_linear,
    morse_levels,
    morse_potential,
    nuclear_dipole,
    save_surface_set,
    scf_electronic_ground,
)
from .eigen import (
    EigenSolution,
    ManifoldPartition,
    RelaxationConfig,
    krylov_imaginary_step,
    load_eigen_solution,
    partition_manifolds,
    relax_eigenstates,
    save_eigen_solution,
    transition_dipoles,
)
from .basis import (
    BareState,
    DecompositionTable,
    build_bare_basis,
    decompose,
    format_decomposition_table,
    molecular_eigenstates_1d,
    photon_eigenfunction,
)
from .dqc import (
    DEFAULT_OMEGA2,
    DEFAULT_OMEGA3,
    FrequencyAxis,
    Peak,
    SpectrumGrid,
    compute_dqc,
    difference_spectrum,
    find_peaks,
    load_spectrum,
    normalize_spectrum,
    save_spectrum,
    spectrum_channels,
)
from .config import (
    PRESETS,
    GridSpec,
    RunConfig,
    apply_preset,
    default_config,
    echo_config,
    parse_config,
    set_variant,
)

__version__ = "0.1.0"
