#pragma once

// Diffusive stochastic Schroedinger equations: the qubit unraveling of the
// signed-rate Pauli master equation, the general isometric-noise form,
// Euler-Maruyama stepping with renormalization, and seeded ensembles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "unravel/algebra.hpp"
#include "unravel/errors.hpp"
#include "unravel/master.hpp"
#include "unravel/random.hpp"
#include "unravel/summation.hpp"

namespace unravel {

/// Qubit SSE whose mean obeys d rho/dt = sum_k c_k (sigma_k rho sigma_k - rho):
///   dpsi = -1/2 sum_k c_k (sigma_k - n_k)^2 psi dt + sqrt(2) n_3 psi_perp dW.
/// `perp_phase` multiplies psi_perp by exp(i alpha); it changes sample paths
/// but not the ensemble.
template <typename Scalar>
struct NonCpQubitModel {
  RateVector<Scalar> rates{Scalar(1), Scalar(1), Scalar(-1)};
  Scalar pole_tolerance = Scalar(1e-12);
  Scalar perp_phase = 0;

  Eigen::Index dimension() const { return 2; }
  std::size_t noise_channels() const { return 1; }
  void validate() const {}
};

/// dpsi = [-iH dt + sum_kj u_kj (L_j - <L_j>) dW_k
///         - 1/2 sum_k (L_k^dag L_k - 2 <L_k>^* L_k + |<L_k>|^2) dt] psi
/// with real Wiener increments dW_1..dW_N and an N x n column isometry u.
template <typename Scalar>
struct GeneralDiffusiveModel {
  CMatrix<Scalar> hamiltonian;
  std::vector<CMatrix<Scalar>> lindblads;
  CMatrix<Scalar> noise_matrix;

  Eigen::Index dimension() const { return hamiltonian.rows(); }
  std::size_t noise_channels() const { return static_cast<std::size_t>(noise_matrix.rows()); }

  void validate() const {
    const auto d = hamiltonian.rows();
    if (hamiltonian.cols() != d) throw DimensionError("GeneralDiffusiveModel: H not square");
    if (hermiticity_defect(hamiltonian) > Scalar(1e-12)) {
      throw ValidationError("GeneralDiffusiveModel: H is not Hermitian");
    }
    for (const auto& l : lindblads) {
      if (l.rows() != d || l.cols() != d) {
        throw DimensionError("GeneralDiffusiveModel: Lindblad operator dimension mismatch");
      }
    }
    const auto n = static_cast<Eigen::Index>(lindblads.size());
    if (noise_matrix.cols() != n) {
      throw DimensionError("GeneralDiffusiveModel: u has " + std::to_string(noise_matrix.cols()) +
                           " columns for " + std::to_string(n) + " Lindblad operators");
    }
    if (noise_matrix.rows() < n) throw DimensionError("GeneralDiffusiveModel: need N >= n");
    const CMatrix<Scalar> gram = noise_matrix.adjoint() * noise_matrix;
    if (n > 0 && max_abs(gram - CMatrix<Scalar>::Identity(n, n)) > Scalar(1e-10)) {
      throw ValidationError("GeneralDiffusiveModel: u^dagger u != I");
    }
  }

  /// Lindblad generator whose solution the ensemble reproduces.
  MasterGenerator<Scalar> master() const {
    MasterGenerator<Scalar> g{hamiltonian, {}};
    for (const auto& l : lindblads) g.channels.push_back({Scalar(1), l});
    return g;
  }
};

/// General model with L_k = sqrt(c_k) sigma_k and u = I_3 (requires c_k >= 0).
template <typename Scalar>
GeneralDiffusiveModel<Scalar> pauli_diffusive_model(const RateVector<Scalar>& c) {
  GeneralDiffusiveModel<Scalar> m{CMatrix<Scalar>::Zero(2, 2), {}, CMatrix<Scalar>::Identity(3, 3)};
  for (int k = 0; k < 3; ++k) {
    if (c(k) < 0) {
      throw ValidationError("pauli_diffusive_model: negative rate has no Lindblad operator");
    }
    m.lindblads.push_back(std::sqrt(c(k)) * pauli<Scalar>(k + 1));
  }
  return m;
}

template <typename Scalar>
void require_normalized(const StateVector<Scalar>& psi, const char* where) {
  if (std::abs(psi.squaredNorm() - 1) > Scalar(1e-10)) {
    throw ValidationError(std::string(where) + ": state is not normalized");
  }
}

namespace detail {

template <typename Scalar>
Qubit<Scalar> perp_qubit(const Qubit<Scalar>& psi, const BlochVector<Scalar>& n,
                         Scalar pole_tolerance) {
  // n_1^2 + n_2^2 = 1 - n_3^2 for pure states, without the cancellation near the poles.
  const Scalar gap = n(0) * n(0) + n(1) * n(1);
  Qubit<Scalar> perp;
  if (gap < pole_tolerance) {
    perp << -std::conj(psi(1)), std::conj(psi(0));
  } else {
    perp = (n(1) * apply_pauli<Scalar>(1, psi) - n(0) * apply_pauli<Scalar>(2, psi)) /
           std::sqrt(gap);
  }
  return perp / perp.norm();
}

}  // namespace detail

/// Unit vector orthogonal to a qubit state:
/// (1 - n_3^2)^{-1/2} (n_2 sigma_1 - n_1 sigma_2) psi, or (-conj(psi_2), conj(psi_1))
/// when 1 - n_3^2 < pole_tolerance. The result is renormalized to absorb rounding.
template <typename Scalar>
StateVector<Scalar> perp_state(const StateVector<Scalar>& psi,
                               Scalar pole_tolerance = Scalar(1e-12)) {
  require_qubit(psi, "perp_state");
  const Qubit<Scalar> q = psi;
  return detail::perp_qubit<Scalar>(q, bloch_from_state(psi), pole_tolerance);
}

/// psi + dpsi for the signed-rate qubit SSE (Ito: coefficients at psi).
template <typename Scalar>
StateVector<Scalar> noncp_increment(const StateVector<Scalar>& psi,
                                    const NonCpQubitModel<Scalar>& m, Scalar dw, Scalar dt) {
  require_qubit(psi, "noncp_increment");
  const Qubit<Scalar> q = psi;
  const BlochVector<Scalar> n = bloch_from_state(psi);
  Qubit<Scalar> drift = Qubit<Scalar>::Zero();
  for (int k = 0; k < 3; ++k) {
    const Qubit<Scalar> shifted = apply_pauli<Scalar>(k + 1, q) - n(k) * q;
    drift += m.rates(k) * (apply_pauli<Scalar>(k + 1, shifted) - n(k) * shifted);
  }
  const Complex<Scalar> noise_coeff =
      std::sqrt(Scalar(2)) * n(2) * std::polar(Scalar(1), m.perp_phase) * dw;
  const Qubit<Scalar> out =
      q - (dt / 2) * drift + noise_coeff * detail::perp_qubit<Scalar>(q, n, m.pole_tolerance);
  return out;
}

/// psi + dpsi for the general diffusive SSE (Ito). dw has length N.
template <typename Scalar>
StateVector<Scalar> general_increment(const StateVector<Scalar>& psi,
                                      const GeneralDiffusiveModel<Scalar>& m,
                                      std::span<const Scalar> dw, Scalar dt) {
  const auto d = m.dimension();
  if (psi.size() != d) {
    throw DimensionError("general_increment: state has d = " + std::to_string(psi.size()) +
                         ", model has d = " + std::to_string(d));
  }
  if (dw.size() != m.noise_channels()) {
    throw UsageError("general_increment: got " + std::to_string(dw.size()) +
                     " noise increments, model has N = " + std::to_string(m.noise_channels()));
  }
  const Complex<Scalar> i(0, 1);
  StateVector<Scalar> out = psi - i * dt * (m.hamiltonian * psi);
  for (std::size_t j = 0; j < m.lindblads.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const StateVector<Scalar> lpsi = m.lindblads[j] * psi;
    const Complex<Scalar> mean = psi.dot(lpsi);  // <psi|L|psi>
    // dxi_j^* = sum_k dW_k u_kj
    Complex<Scalar> xi(0);
    for (Eigen::Index k = 0; k < m.noise_matrix.rows(); ++k) {
      xi += dw[static_cast<std::size_t>(k)] * m.noise_matrix(k, jj);
    }
    out += xi * (lpsi - mean * psi);
    out -= (dt / 2) * (m.lindblads[j].adjoint() * lpsi - Scalar(2) * std::conj(mean) * lpsi +
                       std::norm(mean) * psi);
  }
  return out;
}

template <typename Scalar>
StateVector<Scalar> increment(const StateVector<Scalar>& psi, const NonCpQubitModel<Scalar>& m,
                              std::span<const Scalar> dw, Scalar dt) {
  if (dw.size() != 1) throw UsageError("noncp_increment: expected one noise increment");
  return noncp_increment(psi, m, dw[0], dt);
}

template <typename Scalar>
StateVector<Scalar> increment(const StateVector<Scalar>& psi,
                              const GeneralDiffusiveModel<Scalar>& m, std::span<const Scalar> dw,
                              Scalar dt) {
  return general_increment(psi, m, dw, dt);
}

/// Phase gauge psi -> exp(-i dchi) psi, applied as an exact phase factor.
template <typename Scalar>
StateVector<Scalar> apply_gauge(const StateVector<Scalar>& psi, Scalar dchi) {
  return std::polar(Scalar(1), -dchi) * psi;
}

/// dchi(psi, dW, dt) evaluated at the pre-step state.
template <typename Scalar>
using GaugeFunctional =
    std::function<Scalar(const StateVector<Scalar>&, std::span<const Scalar>, Scalar)>;

template <typename Scalar>
struct StepResult {
  StateVector<Scalar> state;
  Scalar norm_drift;  ///< |‖psi + dpsi‖^2 - 1| before renormalization
};

/// One Euler-Maruyama step followed by renormalization.
template <typename Scalar, typename Model>
StepResult<Scalar> step(const StateVector<Scalar>& psi, const Model& m,
                        std::span<const Scalar> dw, Scalar dt, std::size_t step_index = 0) {
  const StateVector<Scalar> next = increment(psi, m, dw, dt);
  const Scalar norm = next.norm();
  if (!(norm >= Scalar(0.1))) throw StepFailure(step_index, static_cast<double>(norm));
  return {next / norm, std::abs(norm * norm - 1)};
}

/// Fills dW for one step. Default source: NoiseStream keyed by (seed, trajectory).
template <typename Scalar>
using NoiseSource = std::function<void(std::uint32_t step, std::span<Scalar> dw, Scalar dt)>;

template <typename Scalar>
NoiseSource<Scalar> stream_noise(std::uint64_t seed, std::uint64_t trajectory_id) {
  return [stream = NoiseStream(seed, trajectory_id)](std::uint32_t s, std::span<Scalar> dw,
                                                     Scalar dt) {
    for (std::size_t k = 0; k < dw.size(); ++k) {
      dw[k] = Scalar(stream.increment(s, static_cast<std::uint32_t>(k), double(dt)));
    }
  };
}

template <typename Scalar>
struct Trajectory {
  std::vector<Scalar> times;
  std::vector<StateVector<Scalar>> states;
  std::vector<Scalar> norm_drift;  ///< one entry per step
};

/// Drives `visit(step_index, time, state)` along one trajectory, starting
/// with (0, 0, psi0). Returns the per-step norm drift.
template <typename Scalar, typename Model, typename Visitor>
std::vector<Scalar> propagate(const Model& m, const StateVector<Scalar>& psi0, Scalar t_final,
                              Scalar dt, const NoiseSource<Scalar>& noise,
                              const GaugeFunctional<Scalar>& gauge, Visitor&& visit) {
  require_normalized(psi0, "simulate_trajectory");
  if (psi0.size() != m.dimension()) throw DimensionError("simulate_trajectory: psi0 dimension");
  const auto steps = uniform_step_count(t_final, dt);
  if (steps > std::int64_t{std::numeric_limits<std::uint32_t>::max()}) {
    throw UsageError("simulate_trajectory: too many steps");
  }
  const Scalar h = steps > 0 ? t_final / static_cast<Scalar>(steps) : Scalar(0);
  std::vector<Scalar> dw(m.noise_channels());
  std::vector<Scalar> drift;
  drift.reserve(static_cast<std::size_t>(steps));
  StateVector<Scalar> psi = psi0;
  visit(std::int64_t{0}, Scalar(0), psi);
  for (std::int64_t s = 0; s < steps; ++s) {
    noise(static_cast<std::uint32_t>(s), std::span<Scalar>(dw), h);
    const std::span<const Scalar> dws(dw);
    auto result = step<Scalar>(psi, m, dws, h, static_cast<std::size_t>(s));
    if (gauge) result.state = apply_gauge(result.state, gauge(psi, dws, h));
    psi = std::move(result.state);
    drift.push_back(result.norm_drift);
    visit(s + 1, h * static_cast<Scalar>(s + 1), psi);
  }
  return drift;
}

template <typename Scalar, typename Model>
Trajectory<Scalar> simulate_trajectory(const Model& m, const StateVector<Scalar>& psi0,
                                       Scalar t_final, Scalar dt, const NoiseSource<Scalar>& noise,
                                       const GaugeFunctional<Scalar>& gauge = {}) {
  m.validate();
  Trajectory<Scalar> traj;
  traj.norm_drift = propagate(m, psi0, t_final, dt, noise, gauge,
                              [&](std::int64_t, Scalar t, const StateVector<Scalar>& psi) {
                                traj.times.push_back(t);
                                traj.states.push_back(psi);
                              });
  return traj;
}

/// Deterministic in (seed, trajectory_id).
template <typename Scalar, typename Model>
Trajectory<Scalar> simulate_trajectory(const Model& m, const StateVector<Scalar>& psi0,
                                       Scalar t_final, Scalar dt, std::uint64_t seed,
                                       std::uint64_t trajectory_id,
                                       const GaugeFunctional<Scalar>& gauge = {}) {
  return simulate_trajectory(m, psi0, t_final, dt, stream_noise<Scalar>(seed, trajectory_id),
                             gauge);
}

/// Step indices at which an ensemble is recorded: 0 and round(i * steps / points),
/// i = 1..points. points == 0 records every step.
inline std::vector<std::int64_t> report_steps(std::int64_t steps, std::int64_t points) {
  std::vector<std::int64_t> out{0};
  if (points <= 0 || points >= steps) {
    for (std::int64_t s = 1; s <= steps; ++s) out.push_back(s);
    return out;
  }
  for (std::int64_t i = 1; i <= points; ++i) {
    const auto s = static_cast<std::int64_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(steps) / double(points)));
    if (s > out.back()) out.push_back(s);
  }
  return out;
}

template <typename Scalar>
struct EnsembleEstimate {
  std::vector<Scalar> times;
  std::vector<DensityMatrix<Scalar>> mean_density;
  std::vector<BlochVector<Scalar>> mean_bloch;      ///< qubit ensembles only
  std::vector<BlochVector<Scalar>> standard_error;  ///< qubit only; NaN when N = 1
  std::uint64_t trajectories = 0;
};

struct EnsembleOptions {
  std::int64_t grid_points = 32;  ///< report times in (0, T]; 0 = every step
  unsigned threads = 1;           ///< wall-time only, never results
  std::uint64_t block_size = 64;  ///< trajectories per reduction leaf
};

namespace detail {

template <typename Scalar>
struct Moments {
  CMatrix<Scalar> rho;
  BlochVector<Scalar> n;
  BlochVector<Scalar> n2;

  friend Moments operator+(const Moments& a, const Moments& b) {
    return {a.rho + b.rho, a.n + b.n, a.n2 + b.n2};
  }
};

template <typename Scalar>
struct MomentSeries {
  std::vector<Moments<Scalar>> points;

  friend MomentSeries operator+(const MomentSeries& a, const MomentSeries& b) {
    MomentSeries out{a.points};
    for (std::size_t i = 0; i < out.points.size(); ++i) out.points[i] = a.points[i] + b.points[i];
    return out;
  }
};

}  // namespace detail

/// rho(t) = E |psi(t)><psi(t)| over trajectories 0..N-1 of `seed`.
/// Trajectories are grouped into fixed blocks; each block and then the
/// block partials are reduced by pairwise summation in index order, so the
/// estimate is identical for any thread count.
template <typename Scalar, typename Model>
EnsembleEstimate<Scalar> ensemble_density(const Model& m, const StateVector<Scalar>& psi0,
                                          Scalar t_final, Scalar dt, std::uint64_t trajectories,
                                          std::uint64_t seed, const EnsembleOptions& opt = {}) {
  using Series = detail::MomentSeries<Scalar>;
  m.validate();
  if (trajectories < 1) throw UsageError("ensemble_density: need at least one trajectory");
  require_normalized(psi0, "ensemble_density");
  const auto steps = uniform_step_count(t_final, dt);
  const auto grid = report_steps(steps, opt.grid_points);
  const Scalar h = steps > 0 ? t_final / static_cast<Scalar>(steps) : Scalar(0);
  const auto d = m.dimension();
  const bool qubit = d == 2;
  // Bloch moments are accumulated about n(0) to avoid cancellation in the variance.
  const BlochVector<Scalar> origin =
      qubit ? bloch_from_state(psi0) : BlochVector<Scalar>(BlochVector<Scalar>::Zero());

  auto run_one = [&](std::uint64_t id) {
    Series series;
    series.points.reserve(grid.size());
    std::size_t next = 0;
    propagate(m, psi0, t_final, dt, stream_noise<Scalar>(seed, id), GaugeFunctional<Scalar>{},
              [&](std::int64_t s, Scalar, const StateVector<Scalar>& psi) {
                if (next >= grid.size() || grid[next] != s) return;
                ++next;
                BlochVector<Scalar> n = BlochVector<Scalar>::Zero();
                if (qubit) n = bloch_from_state(psi) - origin;
                series.points.push_back({projector(psi), n, n.cwiseProduct(n)});
              });
    return series;
  };

  const std::uint64_t block = std::max<std::uint64_t>(1, opt.block_size);
  const std::uint64_t blocks = (trajectories + block - 1) / block;
  std::vector<Series> partial(blocks);
  std::atomic<std::uint64_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::uint64_t b = cursor.fetch_add(1);
      if (b >= blocks) return;
      try {
        const std::uint64_t lo = b * block;
        const std::uint64_t hi = std::min(trajectories, lo + block);
        std::vector<Series> leaf;
        leaf.reserve(hi - lo);
        for (std::uint64_t id = lo; id < hi; ++id) leaf.push_back(run_one(id));
        partial[b] = pairwise_sum(std::span<const Series>(leaf));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        cursor.store(blocks);
        return;
      }
    }
  };
  const unsigned threads =
      static_cast<unsigned>(std::clamp<std::uint64_t>(opt.threads, 1, blocks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const Series total = pairwise_sum(std::span<const Series>(partial));
  const auto count = static_cast<Scalar>(trajectories);
  EnsembleEstimate<Scalar> est;
  est.trajectories = trajectories;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& mom = total.points[g];
    est.times.push_back(h * static_cast<Scalar>(grid[g]));
    CMatrix<Scalar> rho = mom.rho / count;
    est.mean_density.push_back((rho + rho.adjoint()) / Scalar(2));
    if (!qubit) continue;
    const BlochVector<Scalar> shifted = mom.n / count;
    BlochVector<Scalar> se;
    for (int k = 0; k < 3; ++k) {
      if (trajectories < 2) {
        se(k) = std::numeric_limits<Scalar>::quiet_NaN();
        continue;
      }
      const Scalar var =
          std::max(Scalar(0), (mom.n2(k) - count * shifted(k) * shifted(k)) / (count - 1));
      se(k) = std::sqrt(var / count);
    }
    est.mean_bloch.push_back(shifted + origin);
    est.standard_error.push_back(se);
  }
  return est;
}

/// max |2 n_3^2 |psi_perp><psi_perp| - sum_k c_k (sigma_k - n_k) P (sigma_k - n_k)|,
/// P = |psi><psi|. Vanishes for c = (1, 1, -1); other rates just report the residual.
template <typename Scalar>
Scalar identity_check(const StateVector<Scalar>& psi, const RateVector<Scalar>& c,
                      Scalar pole_tolerance = Scalar(1e-12)) {
  require_qubit(psi, "identity_check");
  const BlochVector<Scalar> n = bloch_from_state(psi);
  const StateVector<Scalar> perp = perp_state(psi, pole_tolerance);
  const CMatrix<Scalar> lhs = 2 * n(2) * n(2) * projector(perp);
  const CMatrix<Scalar> p = projector(psi);
  const CMatrix<Scalar> id = CMatrix<Scalar>::Identity(2, 2);
  CMatrix<Scalar> rhs = CMatrix<Scalar>::Zero(2, 2);
  for (int k = 0; k < 3; ++k) {
    const CMatrix<Scalar> shifted = pauli<Scalar>(k + 1) - n(k) * id;
    rhs += c(k) * shifted * p * shifted;
  }
  return max_abs(lhs - rhs);
}

}  // namespace unravel
