#pragma once

#include "magdecay/spectral.hpp"

namespace magdecay {

struct PropagateResult {
    std::vector<double> times;             // reported times (may be truncated)
    std::vector<double> sup_norms;
    std::vector<double> l2_norms;
    std::vector<double> boundary_mass;     // boundary-shell |f|^2 fraction
    bool truncated = false;                // wrap-around monitor tripped
    double breach_time = 0;
    std::vector<ScalarField> snapshots;    // filled when keep_snapshots is set
};

struct PropagateOptions {
    double krylov_tol = 1e-8;
    int krylov_max_dim = 48;
    double max_step = 0.1;
    double shell_mass_limit = 1e-4;
    int shell_cells = 2;
    bool keep_snapshots = false;
};

/// f(t_j) = e^{i t_j H} f0 by adaptive Lanczos exponentials. Stops early and
/// flags truncation when the boundary-shell mass exceeds the monitor limit.
PropagateResult propagate(const HamiltonianOperator& H, const ScalarField& f0,
                          const std::vector<double>& t_grid,
                          const PropagateOptions& opt = {});

struct DecayFit {
    std::vector<double> times;
    std::vector<double> sup_norms;
    double window_lo = 0, window_hi = 0;   // requested window
    double fit_lo = 0, fit_hi = 0;         // window actually fitted
    double exponent = 0;
    double exponent_stderr = 0;
    double amplitude_ratio = 0;            // at the last fitted point
    bool truncated = false;
    double breach_time = 0;
};

/// Log-log fit of sup norms over the window; amplitude against
/// (4 pi t)^{-3/2} ||f0||_1. P_ac is applied to f0 before evolution.
DecayFit decay_experiment(const HamiltonianOperator& H, const SpectrumReport& report,
                          const ScalarField& f0, double window_lo, double window_hi,
                          double dt_sample = 0.1, const PropagateOptions& opt = {});

/// Pure power-law fit of a given series (synthetic-input path).
DecayFit decay_fit_series(const std::vector<double>& times,
                          const std::vector<double>& sup_norms, double window_lo,
                          double window_hi, double l1_norm = 0);

struct WaveKernelTrace {
    Vec3 x, y;
    double dist = 0;
    std::vector<double> times;
    std::vector<double> k_values;       // |K(t)| of the ac part
    std::vector<double> k_full_values;  // |K_ac(t) + point part| (finite speed)
    double i1 = 0;                      // int t |K| dt
    double i2 = 0;                      // int |K| dt
    double i1_tail_first = 0, i1_tail_second = 0;  // tail halves of t|K|
    double quiet_sup = 0;               // sup |K_full| over t < 0.9 |x-y|
    double peak = 0;                    // sup |K|
};

struct WaveOptions {
    double t_max = 0;          // default: 1.2 dist + spread
    int n_t = 400;
    double smoothing = 0;      // spectral cutoff Lambda_c; 0 = auto
};

/// Free-case sine kernel via the exact Fourier multiplier on the grid
/// (all modes participate; right for H = -Delta only).
WaveKernelTrace wave_sine_kernel_free(const Grid3D& grid, const Vec3& x, const Vec3& y,
                                      const WaveOptions& opt = {});

/// Dense-path sine kernel sum over eigenpairs for perturbed H (n <= 16).
class DenseWaveCalculus {
  public:
    DenseWaveCalculus(const HamiltonianOperator& H, double zero_tol = 1e-6);

    WaveKernelTrace trace(const Vec3& x, const Vec3& y,
                          const WaveOptions& opt = {}) const;
    int negative_count() const { return negatives_; }

  private:
    Grid3D grid_;
    std::vector<double> evals_;
    Eigen::MatrixXcd evecs_;
    int negatives_ = 0;
    double zero_tol_;

    int nearest_index(const Vec3& p) const;
};

struct WaveBoundReport {
    std::vector<WaveKernelTrace> traces;
    double max_i2_scaled = 0;   // max over pairs of I2 * 4 pi |x-y|
    double min_i2_scaled = 0;
    double max_quiet_rel = 0;   // max over pairs of quiet_sup / peak
    bool i1_tail_decaying = true;
};

WaveBoundReport wave_bound_checks(const std::vector<WaveKernelTrace>& traces);

}  // namespace magdecay
