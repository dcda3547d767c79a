"""Quantum walks on Z^d with random time-dependent coins.

Exact unitary evolution, doubled-space spectral analysis of the averaged
dynamics, Markov-chain reductions of permutation-coin models, deviation
rate functions, and seeded Monte Carlo, cross-validated against each other.
"""

from .chain import (
    ChainCovariance,
    ChainModel,
    build_chain,
    chain_covariance,
    chain_from_ensemble,
    clt_probe,
    exact_sn_distribution,
    irreducible,
    ks_distance_chi_square,
    random_diffusion_law,
    stationary,
)
from .ensembles import (
    FiniteCoinEnsemble,
    MarkovCoinProcess,
    PermutationCoinSpec,
    PermutationEnsemble,
    PermutationMeasure,
    SeededStream,
    bernoulli_identity_swap,
    enumerate_sequences,
    make_permutation_coin,
    marginal_permutation_measure,
    permutation_spec_from_coin,
    sample_sequence,
)
from .markov import (
    averaged_char_markov,
    block_initial,
    block_operator,
    check_assumption_s2,
    chi_p,
    markov_averaged_diffusion,
    markov_diffusion,
    markov_model,
)
from .mc import McEstimate, mc_averaged_distribution, mc_char_function, mc_moment_scaling
from .rates import (
    DiffusionFamily,
    RateFunctionTable,
    argmax_v,
    ld_rate,
    ld_rate_table,
    md_rate,
    md_rate_table,
    perron_root,
    tilted_matrix,
)
from .spectral import (
    AssumptionReport,
    AveragedModel,
    CyclicSubspace,
    DiffusionReport,
    averaged_char_function,
    averaged_diffusion,
    averaged_distribution,
    averaged_model,
    check_assumption,
    cyclic_subspace,
    diffusion_matrix,
    diffusion_report,
    drift,
    einstein_scan,
    expected_doubled,
    m_matrix,
    phase_matrix,
    psi1_vector,
    reduced_resolvent,
    scaling_limit_probe,
    swap_operator,
)
from .walk import (
    Coin,
    DensityKernel,
    JumpFunction,
    LatticeDistribution,
    WalkState,
    apply_step,
    char_function_via_fourier,
    characteristic_function,
    coin_labels,
    density_distribution,
    evolve,
    fourier_jn,
    jk_matrices,
    label_index,
    moments,
    position_distribution,
)

__version__ = "0.1.0"
