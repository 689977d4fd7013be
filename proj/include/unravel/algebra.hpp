#pragma once

// Small dense complex linear algebra for qubit and few-level systems.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "unravel/errors.hpp"
#include "unravel/random.hpp"

namespace unravel {

template <typename Scalar>
using Complex = std::complex<Scalar>;

/// Dense row-major complex matrix.
template <typename Scalar>
using CMatrix = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using CVector = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using RMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// State vector psi. Normalization is a tagged property, checked where required.
template <typename Scalar>
using StateVector = CVector<Scalar>;

/// Bloch vector n with rho = (I + n.sigma) / 2.
template <typename Scalar>
using BlochVector = Eigen::Matrix<Scalar, 3, 1>;

/// Pauli matrix sigma_k, k in {1, 2, 3}.
template <typename Scalar = double>
CMatrix<Scalar> pauli(int k) {
  using C = Complex<Scalar>;
  CMatrix<Scalar> s(2, 2);
  switch (k) {
    case 1:
      s << C(0), C(1), C(1), C(0);
      break;
    case 2:
      s << C(0), C(0, -1), C(0, 1), C(0);
      break;
    case 3:
      s << C(1), C(0), C(0), C(-1);
      break;
    default:
      throw UsageError("pauli: index " + std::to_string(k) + " not in {1,2,3}");
  }
  return s;
}

template <typename Scalar>
using Qubit = Eigen::Matrix<Complex<Scalar>, 2, 1>;

/// sigma_k psi for a fixed-size qubit vector, without forming sigma_k.
template <typename Scalar>
Qubit<Scalar> apply_pauli(int k, const Qubit<Scalar>& psi) {
  const Complex<Scalar> i(0, 1);
  switch (k) {
    case 1:
      return {psi(1), psi(0)};
    case 2:
      return {-i * psi(1), i * psi(0)};
    case 3:
      return {psi(0), -psi(1)};
    default:
      throw UsageError("apply_pauli: index " + std::to_string(k) + " not in {1,2,3}");
  }
}

/// max_ij |A_ij - conj(A_ji)|.
template <typename Derived>
auto hermiticity_defect(const Eigen::MatrixBase<Derived>& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
auto max_abs(const Eigen::MatrixBase<Derived>& a) {
  return a.cwiseAbs().maxCoeff();
}

template <typename Scalar>
void require_qubit(const StateVector<Scalar>& psi, const char* where) {
  if (psi.size() != 2) {
    throw DimensionError(std::string(where) + ": expected d = 2, got d = " +
                         std::to_string(psi.size()));
  }
}

/// n_k = <psi|sigma_k|psi>. psi must be a normalized qubit state.
template <typename Scalar>
BlochVector<Scalar> bloch_from_state(const StateVector<Scalar>& psi) {
  require_qubit(psi, "bloch_from_state");
  const Complex<Scalar> a = psi(0);
  const Complex<Scalar> b = psi(1);
  const Complex<Scalar> cross = std::conj(a) * b;
  return {2 * cross.real(), 2 * cross.imag(), std::norm(a) - std::norm(b)};
}

/// Bloch vector of a 2x2 density (or any Hermitian) matrix: n_k = tr(rho sigma_k).
template <typename Scalar>
BlochVector<Scalar> bloch_from_density(const CMatrix<Scalar>& rho) {
  if (rho.rows() != 2 || rho.cols() != 2) {
    throw DimensionError("bloch_from_density: expected a 2x2 matrix");
  }
  return {2 * rho(0, 1).real(), -2 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

/// (I + n.sigma) / 2.
template <typename Scalar>
CMatrix<Scalar> density_from_bloch(const BlochVector<Scalar>& n) {
  using C = Complex<Scalar>;
  CMatrix<Scalar> rho(2, 2);
  rho << C((1 + n(2)) / 2), C(n(0) / 2, -n(1) / 2), C(n(0) / 2, n(1) / 2), C((1 - n(2)) / 2);
  return rho;
}

/// Pure state on the Bloch sphere with a real, non-negative first amplitude
/// (or psi = (0, 1) at the south pole). n is normalized first.
template <typename Scalar>
StateVector<Scalar> state_from_bloch(const BlochVector<Scalar>& n) {
  const BlochVector<Scalar> m = n.normalized();
  const Scalar theta = std::acos(std::clamp(m(2), Scalar(-1), Scalar(1)));
  const Scalar phi = std::atan2(m(1), m(0));
  StateVector<Scalar> psi(2);
  psi << Complex<Scalar>(std::cos(theta / 2)), std::polar(std::sin(theta / 2), phi);
  return psi;
}

template <typename Scalar>
CMatrix<Scalar> projector(const StateVector<Scalar>& psi) {
  return psi * psi.adjoint();
}

template <typename Scalar>
struct HermitianEigen {
  RVector<Scalar> eigenvalues;   ///< ascending
  CMatrix<Scalar> eigenvectors;  ///< columns, unitary
};

/// Eigen-decomposition of a Hermitian matrix (dimension <= 8) by cyclic
/// complex Jacobi rotations. Sweeps until the off-diagonal Frobenius norm
/// drops below 1e-13 (relative to ||A||_F when that exceeds one).
template <typename Scalar>
HermitianEigen<Scalar> hermitian_eigen(const CMatrix<Scalar>& input) {
  using C = Complex<Scalar>;
  const Eigen::Index n = input.rows();
  if (n != input.cols()) throw DimensionError("hermitian_eigen: matrix is not square");
  if (n == 0 || n > 8) {
    throw DimensionError("hermitian_eigen: dimension " + std::to_string(n) + " not in [1, 8]");
  }
  if (hermiticity_defect(input) > Scalar(1e-12)) {
    throw ValidationError("hermitian_eigen: input is not Hermitian");
  }

  CMatrix<Scalar> a = (input + input.adjoint()) / Scalar(2);
  CMatrix<Scalar> v = CMatrix<Scalar>::Identity(n, n);
  const Scalar threshold = Scalar(1e-13) * std::max(Scalar(1), a.norm());

  auto off_norm = [&] {
    Scalar s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() >= threshold; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar r = std::abs(a(p, q));
        if (r == Scalar(0)) continue;
        const C phase = a(p, q) / r;  // e^{i phi}
        const Scalar app = a(p, p).real();
        const Scalar aqq = a(q, q).real();
        const Scalar tau = (aqq - app) / (2 * r);
        const Scalar t = (tau >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(tau) + std::sqrt(Scalar(1) + tau * tau));
        const Scalar c = 1 / std::sqrt(Scalar(1) + t * t);
        const Scalar s = t * c;
        // Rotation G restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]].
        const C g_pp(c), g_pq(s), g_qp = -s * std::conj(phase), g_qq = c * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {  // A <- A G
          const C akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * g_pp + akq * g_qp;
          a(k, q) = akp * g_pq + akq * g_qq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {  // A <- G^dagger A
          const C apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(g_pp) * apk + std::conj(g_qp) * aqk;
          a(q, k) = std::conj(g_pq) * apk + std::conj(g_qq) * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {  // V <- V G
          const C vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * g_pp + vkq * g_qp;
          v(k, q) = vkp * g_pq + vkq * g_qq;
        }
        a(p, q) = a(q, p) = C(0);
        a(p, p) = C(a(p, p).real());
        a(q, q) = C(a(q, q).real());
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return a(i, i).real() < a(j, j).real();
  });
  HermitianEigen<Scalar> out{RVector<Scalar>(n), CMatrix<Scalar>(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src).real();
    out.eigenvectors.col(k) = v.col(src);
  }
  return out;
}

/// Real symmetric overload, routed through the complex solver.
template <typename Scalar>
HermitianEigen<Scalar> hermitian_eigen(const RMatrix<Scalar>& input) {
  return hermitian_eigen<Scalar>(CMatrix<Scalar>(input.template cast<Complex<Scalar>>()));
}

/// Vector of i.i.d. standard complex Gaussians (E|z|^2 = 1), drawn from
/// position `sample` of the stream.
template <typename Scalar = double>
CVector<Scalar> complex_gaussian(const CounterRng& rng, std::uint32_t sample, Eigen::Index size) {
  CVector<Scalar> g(size);
  const Scalar half = std::sqrt(Scalar(0.5));
  for (Eigen::Index k = 0; k < size; ++k) {
    const auto slot = static_cast<std::uint32_t>(2 * k);
    g(k) = Complex<Scalar>(half * Scalar(rng.normal(sample, slot)),
                           half * Scalar(rng.normal(sample, slot + 1)));
  }
  return g;
}

/// Haar-random pure state g / ||g|| for sample number `sample` of the stream.
template <typename Scalar = double>
StateVector<Scalar> random_state(const CounterRng& rng, std::uint32_t sample, Eigen::Index d) {
  if (d < 2) throw UsageError("random_state: d must be at least 2");
  CVector<Scalar> g = complex_gaussian<Scalar>(rng, sample, d);
  return g / g.norm();
}

}  // namespace unravel
