#pragma once

// Noise-matrix / correlation-matrix parametrization of diffusive unravelings.
//
// An N x n column isometry u mixes n Lindblad channels into N real Wiener
// processes; the complex noises dxi_j^* = sum_k dW_k u_kj have correlation
// s_jl = E[dxi_j dxi_l] / dt with s^* = u^T u. Different u with the same s
// give the same physics, e.g. u and O u for any real orthogonal O.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "unravel/algebra.hpp"
#include "unravel/errors.hpp"
#include "unravel/random.hpp"
#include "unravel/sse.hpp"

namespace unravel {

inline constexpr double kIsometryTolerance = 1e-10;
inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kNormTolerance = 1e-10;
inline constexpr double kDegenerateSingularValue = 1e-12;

template <typename Scalar>
Scalar isometry_defect(const CMatrix<Scalar>& u) {
  return max_abs(CMatrix<Scalar>(u.adjoint() * u) - CMatrix<Scalar>::Identity(u.cols(), u.cols()));
}

template <typename Scalar>
void require_isometry(const CMatrix<Scalar>& u, const char* where) {
  if (u.rows() < u.cols() || u.cols() < 1) {
    throw DimensionError(std::string(where) + ": noise matrix must be N x n with N >= n >= 1");
  }
  if (isometry_defect(u) > Scalar(kIsometryTolerance)) {
    throw ValidationError(std::string(where) + ": u^dagger u != I");
  }
}

template <typename Scalar>
struct SValidation {
  bool symmetric = false;
  Scalar spectral_norm = 0;
  bool feasible = false;
};

/// Spectral norm from the largest eigenvalue of s^dagger s.
template <typename Scalar>
SValidation<Scalar> validate_s(const CMatrix<Scalar>& s) {
  if (s.rows() != s.cols()) throw DimensionError("validate_s: matrix is not square");
  SValidation<Scalar> v;
  v.symmetric = max_abs(CMatrix<Scalar>(s - s.transpose())) <= Scalar(kSymmetryTolerance);
  const CMatrix<Scalar> gram = s.adjoint() * s;
  const auto eig = hermitian_eigen<Scalar>(CMatrix<Scalar>((gram + gram.adjoint()) / Scalar(2)));
  v.spectral_norm = std::sqrt(std::max(Scalar(0), eig.eigenvalues(eig.eigenvalues.size() - 1)));
  v.feasible = v.symmetric && v.spectral_norm <= 1 + Scalar(kNormTolerance);
  return v;
}

/// s = conj(u^T u).
template <typename Scalar>
CMatrix<Scalar> s_from_u(const CMatrix<Scalar>& u) {
  require_isometry(u, "s_from_u");
  const CMatrix<Scalar> s = (u.transpose() * u).conjugate();
  if (validate_s(s).spectral_norm > 1 + Scalar(kNormTolerance)) {
    throw std::logic_error("s_from_u: isometric u produced ||s|| > 1");
  }
  return s;
}

/// dxi^* = u^T dW.
template <typename Scalar>
CVector<Scalar> map_noise(const CMatrix<Scalar>& u, std::span<const Scalar> dw) {
  if (static_cast<Eigen::Index>(dw.size()) != u.rows()) {
    throw UsageError("map_noise: got " + std::to_string(dw.size()) + " increments for N = " +
                     std::to_string(u.rows()));
  }
  const Eigen::Map<const RVector<Scalar>> w(dw.data(), u.rows());
  return u.transpose() * w.template cast<Complex<Scalar>>();
}

/// A = V diag(sigma) V^T with V unitary, sigma >= 0 (descending).
template <typename Scalar>
struct Takagi {
  RVector<Scalar> singular_values;
  CMatrix<Scalar> unitary;
};

/// Takagi factorization of a complex symmetric A = B + iC (n <= 4).
///
/// A conj(w) = sigma w with w = x + iy is the real eigenproblem
/// [[B, C], [C, -B]] (x; y) = sigma (x; y), whose spectrum is +-sigma. The
/// eigenvectors of the n largest eigenvalues give orthonormal w; columns
/// for sigma below 1e-12 are filled with an orthonormal completion.
template <typename Scalar>
Takagi<Scalar> takagi(const CMatrix<Scalar>& a) {
  const Eigen::Index n = a.rows();
  if (n != a.cols() || n < 1 || n > 4) throw DimensionError("takagi: need square n x n, n <= 4");
  if (max_abs(CMatrix<Scalar>(a - a.transpose())) > Scalar(kSymmetryTolerance)) {
    throw ValidationError("takagi: matrix is not symmetric");
  }
  const CMatrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  RMatrix<Scalar> embed(2 * n, 2 * n);
  embed << sym.real(), sym.imag(), sym.imag(), -sym.real();
  const auto eig = hermitian_eigen<Scalar>(embed);

  Takagi<Scalar> out{RVector<Scalar>::Zero(n), CMatrix<Scalar>::Zero(n, n)};
  Eigen::Index filled = 0;
  for (Eigen::Index k = 2 * n - 1; k >= n; --k) {
    const Scalar sigma = eig.eigenvalues(k);
    if (sigma <= Scalar(kDegenerateSingularValue)) break;
    // Eigenvectors of a real symmetric matrix: fix the global phase so x, y are real.
    CVector<Scalar> v = eig.eigenvectors.col(k);
    Eigen::Index pivot;
    v.cwiseAbs().maxCoeff(&pivot);
    v *= std::conj(v(pivot)) / std::abs(v(pivot));
    const RVector<Scalar> x = v.head(n).real();
    const RVector<Scalar> y = v.tail(n).real();
    CVector<Scalar> w(n);
    for (Eigen::Index r = 0; r < n; ++r) w(r) = Complex<Scalar>(x(r), y(r));
    out.singular_values(filled) = sigma;
    out.unitary.col(filled) = w / w.norm();
    ++filled;
  }
  // Orthonormal completion spanning the null space of A.
  for (Eigen::Index e = 0; e < n && filled < n; ++e) {
    CVector<Scalar> cand = CVector<Scalar>::Unit(n, e);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index c = 0; c < filled; ++c) {
        cand -= out.unitary.col(c).dot(cand) * out.unitary.col(c);
      }
    }
    if (cand.norm() < Scalar(1e-6)) continue;
    out.unitary.col(filled) = cand / cand.norm();
    out.singular_values(filled) = 0;
    ++filled;
  }
  return out;
}

/// Canonical 2n x n isometry with conj(u^T u) = s:
/// Takagi s^* = V diag(sigma) V^T, p = sqrt((1+sigma)/2), q = sqrt((1-sigma)/2),
/// u = [diag(p); i diag(q)] V^T.
template <typename Scalar>
CMatrix<Scalar> u_from_s(const CMatrix<Scalar>& s) {
  const auto check = validate_s(s);
  if (!check.symmetric) throw ValidationError("u_from_s: s is not symmetric");
  if (!check.feasible) {
    throw InfeasibleError("u_from_s: ||s|| = " + std::to_string(double(check.spectral_norm)) +
                          " exceeds 1");
  }
  const Eigen::Index n = s.rows();
  const auto tk = takagi<Scalar>(CMatrix<Scalar>(s.conjugate()));
  CMatrix<Scalar> core = CMatrix<Scalar>::Zero(2 * n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Scalar sigma = std::clamp(tk.singular_values(j), Scalar(0), Scalar(1));
    core(j, j) = std::sqrt((1 + sigma) / 2);
    core(n + j, j) = Complex<Scalar>(0, std::sqrt((1 - sigma) / 2));
  }
  return core * tk.unitary.transpose();
}

/// Random N x n column isometry: thin Q of a complex Gaussian matrix.
template <typename Scalar = double>
CMatrix<Scalar> random_isometry(const CounterRng& rng, std::uint32_t sample, Eigen::Index rows,
                                Eigen::Index cols) {
  if (rows < cols || cols < 1) throw UsageError("random_isometry: need N >= n >= 1");
  const CVector<Scalar> g = complex_gaussian<Scalar>(rng, sample, rows * cols);
  const CMatrix<Scalar> a = Eigen::Map<const CMatrix<Scalar>>(g.data(), rows, cols);
  Eigen::HouseholderQR<CMatrix<Scalar>> qr(a);
  return qr.householderQ() * CMatrix<Scalar>::Identity(rows, cols);
}

/// Random real N x N orthogonal matrix: Q of a real Gaussian matrix.
template <typename Scalar = double>
RMatrix<Scalar> random_orthogonal(const CounterRng& rng, std::uint32_t sample, Eigen::Index size) {
  if (size < 1) throw UsageError("random_orthogonal: need N >= 1");
  RMatrix<Scalar> a(size, size);
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    a.data()[k] = Scalar(rng.normal(sample, static_cast<std::uint32_t>(k)));
  }
  Eigen::HouseholderQR<RMatrix<Scalar>> qr(a);
  return qr.householderQ();
}

/// Random complex symmetric s = (A + A^T)/2 rescaled to spectral norm `radius`.
template <typename Scalar = double>
CMatrix<Scalar> random_correlation(const CounterRng& rng, std::uint32_t sample, Eigen::Index n,
                                   Scalar radius = Scalar(0.9)) {
  const CVector<Scalar> g = complex_gaussian<Scalar>(rng, sample, n * n);
  const CMatrix<Scalar> a = Eigen::Map<const CMatrix<Scalar>>(g.data(), n, n);
  CMatrix<Scalar> s = (a + a.transpose()) / Scalar(2);
  const Scalar norm = validate_s(s).spectral_norm;
  if (norm > 0) s *= radius / norm;
  return s;
}

template <typename Scalar>
struct RedundancyWitness {
  bool s_equal = false;
  Scalar s_deviation = 0;             ///< max |s(Ou) - s(u)|
  Scalar max_pathwise_deviation = 0;  ///< max over steps of ||psi_u - psi_Ou||_max
};

/// Runs the general SSE twice from psi0: with noise matrix O u driven by dW,
/// and with u driven by dV = O^T dW. Since sum_k (Ou)_kj dW_k = sum_k u_kj (O^T dW)_k
/// the two paths coincide up to rounding.
template <typename Scalar>
RedundancyWitness<Scalar> redundancy_witness(const CMatrix<Scalar>& u, const RMatrix<Scalar>& o,
                                             const CMatrix<Scalar>& hamiltonian,
                                             const std::vector<CMatrix<Scalar>>& lindblads,
                                             const StateVector<Scalar>& psi0, Scalar t_final,
                                             Scalar dt, std::uint64_t seed) {
  require_isometry(u, "redundancy_witness");
  const Eigen::Index big_n = u.rows();
  if (o.rows() != big_n || o.cols() != big_n) {
    throw DimensionError("redundancy_witness: O must be N x N");
  }
  if (max_abs(RMatrix<Scalar>(o.transpose() * o - RMatrix<Scalar>::Identity(big_n, big_n))) >
      Scalar(kIsometryTolerance)) {
    throw ValidationError("redundancy_witness: O is not orthogonal");
  }
  const CMatrix<Scalar> ou = o.template cast<Complex<Scalar>>() * u;

  RedundancyWitness<Scalar> out;
  out.s_deviation = max_abs(CMatrix<Scalar>(s_from_u(ou) - s_from_u(u)));
  out.s_equal = out.s_deviation <= Scalar(1e-12);

  const GeneralDiffusiveModel<Scalar> direct{hamiltonian, lindblads, ou};
  const GeneralDiffusiveModel<Scalar> rotated{hamiltonian, lindblads, u};
  const NoiseSource<Scalar> base = stream_noise<Scalar>(seed, 0);
  const NoiseSource<Scalar> coupled = [&](std::uint32_t s, std::span<Scalar> dv, Scalar h) {
    RVector<Scalar> dw(big_n);
    base(s, std::span<Scalar>(dw.data(), dw.size()), h);
    const RVector<Scalar> rot = o.transpose() * dw;
    std::copy(rot.data(), rot.data() + rot.size(), dv.begin());
  };
  const auto a = simulate_trajectory(direct, psi0, t_final, dt, base);
  const auto b = simulate_trajectory(rotated, psi0, t_final, dt, coupled);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    out.max_pathwise_deviation =
        std::max(out.max_pathwise_deviation, max_abs(CVector<Scalar>(a.states[k] - b.states[k])));
  }
  return out;
}

}  // namespace unravel
