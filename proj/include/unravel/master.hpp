#pragma once

// Deterministic master-equation engine: Lindblad-form generators with
// signed rates, RK4 integration, the closed-form Pauli-channel solution,
// dynamical-map tomography and complete-positivity diagnostics.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "unravel/algebra.hpp"
#include "unravel/errors.hpp"
#include "unravel/random.hpp"

namespace unravel {

/// Rates (c1, c2, c3) of the Pauli generator; signs unrestricted.
template <typename Scalar>
using RateVector = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using DensityMatrix = CMatrix<Scalar>;

template <typename Scalar>
struct Channel {
  Scalar rate;
  CMatrix<Scalar> op;
};

/// -i[H, rho] + sum_k rate_k (A_k rho A_k^dagger - {A_k^dagger A_k, rho} / 2).
template <typename Scalar>
struct MasterGenerator {
  CMatrix<Scalar> hamiltonian;
  std::vector<Channel<Scalar>> channels;

  Eigen::Index dimension() const { return hamiltonian.rows(); }

  void validate() const {
    const auto d = hamiltonian.rows();
    if (hamiltonian.cols() != d) throw DimensionError("MasterGenerator: Hamiltonian not square");
    if (hermiticity_defect(hamiltonian) > Scalar(1e-12)) {
      throw ValidationError("MasterGenerator: Hamiltonian is not Hermitian");
    }
    for (const auto& ch : channels) {
      if (ch.op.rows() != d || ch.op.cols() != d) {
        throw DimensionError("MasterGenerator: channel operator dimension mismatch");
      }
      if (!std::isfinite(static_cast<double>(ch.rate))) {
        throw ValidationError("MasterGenerator: non-finite rate");
      }
    }
  }
};

/// H = 0, channels (c_k, sigma_k): d rho/dt = sum_k c_k (sigma_k rho sigma_k - rho).
template <typename Scalar>
MasterGenerator<Scalar> pauli_generator(const RateVector<Scalar>& c) {
  MasterGenerator<Scalar> g{CMatrix<Scalar>::Zero(2, 2), {}};
  for (int k = 1; k <= 3; ++k) g.channels.push_back({c(k - 1), pauli<Scalar>(k)});
  return g;
}

template <typename Scalar>
CMatrix<Scalar> lindblad_rhs(const CMatrix<Scalar>& rho, const MasterGenerator<Scalar>& g) {
  const auto d = g.dimension();
  if (rho.rows() != d || rho.cols() != d) {
    throw DimensionError("lindblad_rhs: rho is " + std::to_string(rho.rows()) + "x" +
                         std::to_string(rho.cols()) + ", generator has d = " + std::to_string(d));
  }
  const Complex<Scalar> i(0, 1);
  CMatrix<Scalar> out = -i * (g.hamiltonian * rho - rho * g.hamiltonian);
  for (const auto& ch : g.channels) {
    const CMatrix<Scalar> ada = ch.op.adjoint() * ch.op;
    out += ch.rate * (ch.op * rho * ch.op.adjoint() - (ada * rho + rho * ada) / Scalar(2));
  }
  return out;
}

/// Number of uniform steps covering [0, t] with step at most dt.
template <typename Scalar>
std::int64_t uniform_step_count(Scalar t, Scalar dt) {
  if (!(t >= 0)) throw UsageError("time must be non-negative");
  if (t == 0) return 0;
  if (!(dt > 0)) throw UsageError("dt must be positive when t > 0");
  const Scalar ratio = t / dt;
  const Scalar nearest = std::round(ratio);
  // Absorb rounding in t/dt so that e.g. 0.25/1e-3 gives 250, not 251.
  if (nearest >= 1 && std::abs(ratio - nearest) <= Scalar(1e-9) * nearest) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(std::ceil(ratio));
}

/// Classical RK4 over ceil(t/dt) uniform steps of size t/ceil(t/dt), with
/// (rho + rho^dagger)/2 applied after every step. Works for any Hermitian
/// initial operator; trace is not renormalized.
template <typename Scalar>
DensityMatrix<Scalar> integrate_master(const DensityMatrix<Scalar>& rho0,
                                       const MasterGenerator<Scalar>& g, Scalar t, Scalar dt) {
  const auto steps = uniform_step_count(t, dt);
  CMatrix<Scalar> rho = rho0;
  if (steps == 0) return rho;
  const Scalar h = t / static_cast<Scalar>(steps);
  for (std::int64_t s = 0; s < steps; ++s) {
    const CMatrix<Scalar> k1 = lindblad_rhs(rho, g);
    const CMatrix<Scalar> k2 = lindblad_rhs(CMatrix<Scalar>(rho + (h / 2) * k1), g);
    const CMatrix<Scalar> k3 = lindblad_rhs(CMatrix<Scalar>(rho + (h / 2) * k2), g);
    const CMatrix<Scalar> k4 = lindblad_rhs(CMatrix<Scalar>(rho + h * k3), g);
    rho += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    rho = (rho + rho.adjoint()).eval() / Scalar(2);
  }
  return rho;
}

/// Closed-form Bloch solution of the Pauli generator:
/// n_j(t) = exp(-2 (C - c_j) t) n_j(0), C = c1 + c2 + c3.
template <typename Scalar>
BlochVector<Scalar> analytic_pauli_solution(const BlochVector<Scalar>& n0,
                                            const RateVector<Scalar>& c, Scalar t) {
  const Scalar total = c.sum();
  BlochVector<Scalar> n;
  for (int j = 0; j < 3; ++j) n(j) = std::exp(-2 * (total - c(j)) * t) * n0(j);
  return n;
}

/// Row-major vectorization: vec(A)[i d + j] = A(i, j).
template <typename Scalar>
CVector<Scalar> vectorize(const CMatrix<Scalar>& a) {
  return Eigen::Map<const CVector<Scalar>>(a.data(), a.size());
}

template <typename Scalar>
CMatrix<Scalar> unvectorize(const CVector<Scalar>& v, Eigen::Index d) {
  return Eigen::Map<const CMatrix<Scalar>>(v.data(), d, d);
}

/// Superoperator of a linear map on d x d matrices, acting on row-major vec(rho).
template <typename Scalar>
struct DynamicalMap {
  CMatrix<Scalar> superoperator;
  Scalar time = 0;

  Eigen::Index dimension() const {
    return static_cast<Eigen::Index>(std::lround(std::sqrt(double(superoperator.rows()))));
  }

  CMatrix<Scalar> apply(const CMatrix<Scalar>& rho) const {
    return unvectorize<Scalar>(superoperator * vectorize(rho), dimension());
  }

  static DynamicalMap identity(Eigen::Index d) {
    return {CMatrix<Scalar>::Identity(d * d, d * d), Scalar(0)};
  }

  /// max |tr(Lambda(E_ij)) - delta_ij|.
  Scalar trace_defect() const {
    const auto d = dimension();
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        CMatrix<Scalar> e = CMatrix<Scalar>::Zero(d, d);
        e(i, j) = 1;
        const Complex<Scalar> expected = i == j ? Scalar(1) : Scalar(0);
        worst = std::max(worst, std::abs(apply(e).trace() - expected));
      }
    return worst;
  }

  /// max |Lambda(E_ij^dagger) - Lambda(E_ij)^dagger| over matrix units.
  Scalar hermiticity_defect() const {
    const auto d = dimension();
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        CMatrix<Scalar> e = CMatrix<Scalar>::Zero(d, d);
        e(i, j) = 1;
        const CMatrix<Scalar> lhs = apply(CMatrix<Scalar>(e.adjoint()));
        const CMatrix<Scalar> rhs = apply(e).adjoint();
        worst = std::max(worst, max_abs(lhs - rhs));
      }
    return worst;
  }
};

/// Evolves every matrix unit E_ij with integrate_master. Off-diagonal units
/// are split into the Hermitian pair X = E_ij + E_ji, Y = i(E_ji - E_ij),
/// evolved, and recombined as E_ij = (X + iY)/2, E_ji = (X - iY)/2.
template <typename Scalar>
DynamicalMap<Scalar> extract_map(const MasterGenerator<Scalar>& g, Scalar t, Scalar dt) {
  g.validate();
  const auto d = g.dimension();
  const Complex<Scalar> i(0, 1);
  DynamicalMap<Scalar> m{CMatrix<Scalar>::Zero(d * d, d * d), t};
  auto unit = [d](Eigen::Index r, Eigen::Index c) {
    CMatrix<Scalar> e = CMatrix<Scalar>::Zero(d, d);
    e(r, c) = 1;
    return e;
  };
  for (Eigen::Index a = 0; a < d; ++a) {
    m.superoperator.col(a * d + a) = vectorize(integrate_master(unit(a, a), g, t, dt));
    for (Eigen::Index b = a + 1; b < d; ++b) {
      const CMatrix<Scalar> x = unit(a, b) + unit(b, a);
      const CMatrix<Scalar> y = i * (unit(b, a) - unit(a, b));
      const CMatrix<Scalar> ex = integrate_master(x, g, t, dt);
      const CMatrix<Scalar> ey = integrate_master(y, g, t, dt);
      m.superoperator.col(a * d + b) = vectorize(CMatrix<Scalar>((ex + i * ey) / Scalar(2)));
      m.superoperator.col(b * d + a) = vectorize(CMatrix<Scalar>((ex - i * ey) / Scalar(2)));
    }
  }
  return m;
}

/// Qubit map acting on Bloch vectors as n -> block * n + shift.
template <typename Scalar>
DynamicalMap<Scalar> map_from_bloch(const Eigen::Matrix<Scalar, 3, 3>& block,
                                    const BlochVector<Scalar>& shift = BlochVector<Scalar>::Zero(),
                                    Scalar t = 0) {
  // Lambda(I) = I + shift.sigma, Lambda(sigma_k) = sum_l block(l, k) sigma_l.
  std::array<CMatrix<Scalar>, 4> image;
  image[0] = CMatrix<Scalar>::Identity(2, 2);
  for (int l = 0; l < 3; ++l) image[0] += shift(l) * pauli<Scalar>(l + 1);
  for (int k = 0; k < 3; ++k) {
    image[k + 1] = CMatrix<Scalar>::Zero(2, 2);
    for (int l = 0; l < 3; ++l) image[k + 1] += block(l, k) * pauli<Scalar>(l + 1);
  }
  DynamicalMap<Scalar> m{CMatrix<Scalar>::Zero(4, 4), t};
  for (Eigen::Index a = 0; a < 2; ++a)
    for (Eigen::Index b = 0; b < 2; ++b) {
      CMatrix<Scalar> e = CMatrix<Scalar>::Zero(2, 2);
      e(a, b) = 1;
      // E_ab = sum_mu tr(sigma_mu E_ab)/2 sigma_mu
      CMatrix<Scalar> out = (e.trace() / Scalar(2)) * image[0];
      for (int k = 0; k < 3; ++k) {
        out += (CMatrix<Scalar>(pauli<Scalar>(k + 1) * e).trace() / Scalar(2)) * image[k + 1];
      }
      m.superoperator.col(a * 2 + b) = vectorize(out);
    }
  return m;
}

/// 3x3 real block M with Lambda(sigma_k) = sum_l M(l, k) sigma_l (qubit maps).
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> bloch_block(const DynamicalMap<Scalar>& m) {
  if (m.dimension() != 2) throw DimensionError("bloch_block: map is not a qubit map");
  Eigen::Matrix<Scalar, 3, 3> block;
  for (int k = 0; k < 3; ++k) {
    // tr(sigma_l A) = 2 M(l, k) for A = sum_l M(l, k) sigma_l.
    block.col(k) = bloch_from_density<Scalar>(m.apply(pauli<Scalar>(k + 1))) / Scalar(2);
  }
  return block;
}

/// Unnormalized Choi matrix C = sum_ij E_ij (x) Lambda(E_ij); trace d for
/// trace-preserving maps.
template <typename Scalar>
struct ChoiMatrix {
  CMatrix<Scalar> matrix;
  Eigen::Index dimension = 0;
};

template <typename Scalar>
ChoiMatrix<Scalar> choi_matrix(const DynamicalMap<Scalar>& m) {
  const auto d = m.dimension();
  ChoiMatrix<Scalar> choi{CMatrix<Scalar>::Zero(d * d, d * d), d};
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const CMatrix<Scalar> image = unvectorize<Scalar>(m.superoperator.col(i * d + j), d);
      choi.matrix.block(i * d, j * d, d, d) = image;
    }
  return choi;
}

template <typename Scalar>
struct CpVerdict {
  bool cp = false;
  Scalar min_eigenvalue = 0;      ///< smallest eigenvalue of C / d
  Scalar min_eigenvalue_raw = 0;  ///< smallest eigenvalue of C
  RVector<Scalar> eigenvalues;    ///< spectrum of C / d, ascending
  CVector<Scalar> witness;        ///< eigenvector of the smallest eigenvalue
};

inline constexpr double kDefaultCpTolerance = 1e-9;

/// CP iff the Choi matrix is positive semidefinite: min eig(C/d) >= -tol.
template <typename Scalar>
CpVerdict<Scalar> cp_verdict(const ChoiMatrix<Scalar>& choi,
                             Scalar tol = Scalar(kDefaultCpTolerance)) {
  // RK4 leaves the Choi matrix Hermitian only to rounding; symmetrize before solving.
  const CMatrix<Scalar> herm = (choi.matrix + choi.matrix.adjoint()) / Scalar(2);
  const auto eig = hermitian_eigen<Scalar>(herm);
  const auto d = static_cast<Scalar>(choi.dimension);
  CpVerdict<Scalar> v;
  v.eigenvalues = eig.eigenvalues / d;
  v.min_eigenvalue_raw = eig.eigenvalues(0);
  v.min_eigenvalue = eig.eigenvalues(0) / d;
  v.cp = v.min_eigenvalue >= -tol;
  v.witness = eig.eigenvectors.col(0);
  return v;
}

template <typename Scalar>
struct PositivityVerdict {
  bool positive_on_samples = false;
  Scalar min_output_eigenvalue = 0;
};

/// Applies the map to `samples` Haar-random pure states drawn from `rng`.
/// Violations are reported as found; outputs are never clipped.
template <typename Scalar>
PositivityVerdict<Scalar> positivity_verdict(const DynamicalMap<Scalar>& m, std::uint32_t samples,
                                             const CounterRng& rng,
                                             Scalar tol = Scalar(kDefaultCpTolerance)) {
  if (samples < 1) throw UsageError("positivity_verdict: samples must be >= 1");
  const auto d = m.dimension();
  Scalar worst = std::numeric_limits<Scalar>::infinity();
  for (std::uint32_t s = 0; s < samples; ++s) {
    const auto psi = random_state<Scalar>(rng, s, d);
    CMatrix<Scalar> out = m.apply(projector(psi));
    out = (out + out.adjoint()).eval() / Scalar(2);
    worst = std::min(worst, hermitian_eigen<Scalar>(out).eigenvalues(0));
  }
  return {worst >= -tol, worst};
}

}  // namespace unravel
