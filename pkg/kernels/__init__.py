from kernels.binomial import (
    binom_cdf,
    binom_pmf_matrix,
    binom_pmf_vector,
    binom_sf,
    check_trials,
    log_binom_pmf,
    mpair_cell_probs,
    mpair_log_pmf,
    mpair_pmf,
    tail_vectors,
)
from kernels.continuous import (
    std_normal_cdf,
    std_normal_quantile,
    std_normal_sf,
    t_cdf,
    t_quantile,
    upper_t,
    upper_z,
)
