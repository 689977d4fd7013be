#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "unravel/param.hpp"

using namespace unravel;
using C = std::complex<double>;
using Mat = CMatrix<double>;
using RMat = RMatrix<double>;
using Vec = StateVector<double>;

namespace {

Mat column(std::initializer_list<C> entries) {
  Mat m(static_cast<Eigen::Index>(entries.size()), 1);
  Eigen::Index r = 0;
  for (const C& e : entries) m(r++, 0) = e;
  return m;
}

double diff(const Mat& a, const Mat& b) { return max_abs(Mat(a - b)); }

}  // namespace

TEST_CASE("s_from_u") {
  for (Eigen::Index n = 1; n <= 4; ++n) {
    CHECK(diff(s_from_u(Mat(Mat::Identity(n, n))), Mat::Identity(n, n)) == 0.0);
  }
  for (double r : {0.0, 0.3, 0.8, 1.0}) {
    const double p = std::sqrt((1 + r) / 2), q = std::sqrt((1 - r) / 2);
    const Mat s = s_from_u(column({p, C(0, q)}));
    REQUIRE(s.size() == 1);
    CHECK(std::abs(s(0, 0) - r) <= 1e-15);
  }
  const double h = 1 / std::sqrt(2.0);
  CHECK(std::abs(s_from_u(column({h, C(0, h)}))(0, 0)) <= 1e-16);

  CHECK_THROWS_AS(s_from_u(column({1.0, 1.0})), ValidationError);
  CHECK_THROWS_AS(s_from_u(Mat(Mat::Identity(1, 2))), DimensionError);

  // Output is symmetric with spectral norm <= 1 for random isometries.
  const CounterRng rng(41);
  for (std::uint32_t k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 3, big_n = n + k % 2;
    const Mat s = s_from_u(random_isometry(rng, k, big_n, n));
    const auto v = validate_s(s);
    CHECK(v.symmetric);
    CHECK(v.feasible);
  }
}

TEST_CASE("map_noise") {
  const std::vector<double> e1{1, 0, 0};
  const CVector<double> xi = map_noise(Mat(Mat::Identity(3, 3)), std::span<const double>(e1));
  CHECK(max_abs(CVector<double>(xi - CVector<double>::Unit(3, 0))) == 0.0);
  const std::vector<double> zero{0, 0};
  const Mat u = random_isometry(CounterRng(42), 0, 2, 1);
  CHECK(max_abs(map_noise(u, std::span<const double>(zero))) == 0.0);
  CHECK_THROWS_AS(map_noise(u, std::span<const double>(e1)), UsageError);
}

TEST_CASE("map_noise moments reproduce s and the isometry") {
  const CounterRng rng(43);
  const Mat u = random_isometry(rng, 0, 4, 2);
  const Mat s = s_from_u(u);
  const double dt = 1e-2;
  const NoiseStream stream(44, 0);
  const int draws = 100000;
  Mat second = Mat::Zero(2, 2), mixed = Mat::Zero(2, 2);
  std::vector<double> dw(4);
  for (int i = 0; i < draws; ++i) {
    for (std::uint32_t k = 0; k < 4; ++k) dw[k] = stream.increment(std::uint32_t(i), k, dt);
    const CVector<double> xi_conj = map_noise(u, std::span<const double>(dw));
    const CVector<double> xi = xi_conj.conjugate();
    second += xi * xi.transpose();
    mixed += xi.conjugate() * xi.transpose();
  }
  second /= draws * dt;
  mixed /= draws * dt;
  // E[dxi_j dxi_l] = s_jl dt, E[dxi_j^* dxi_l] = delta_jl dt; 5% of the unit scale.
  CHECK(diff(second, s) <= 0.05);
  CHECK(diff(mixed, Mat::Identity(2, 2)) <= 0.05);
}

TEST_CASE("validate_s") {
  auto v = validate_s(Mat(Mat::Identity(2, 2)));
  CHECK(v.symmetric);
  CHECK(v.feasible);
  CHECK(v.spectral_norm == doctest::Approx(1.0).epsilon(1e-14));

  v = validate_s(Mat(2.0 * Mat::Identity(2, 2)));
  CHECK(!v.feasible);
  CHECK(v.spectral_norm == doctest::Approx(2.0).epsilon(1e-14));

  Mat off = Mat::Zero(2, 2);
  off(0, 1) = off(1, 0) = 0.5;
  v = validate_s(off);
  CHECK(v.feasible);
  CHECK(v.spectral_norm == doctest::Approx(0.5).epsilon(1e-14));

  Mat skew = Mat::Zero(2, 2);
  skew(0, 1) = 0.5;
  v = validate_s(skew);
  CHECK(!v.symmetric);
  CHECK(!v.feasible);

  // Complex symmetric (not Hermitian): singular values differ from |eigenvalues|.
  Mat cs(2, 2);
  cs << C(0, 0.5), 0.2, 0.2, C(0.1, 0.3);
  Eigen::JacobiSVD<Mat> svd(cs);
  CHECK(validate_s(cs).spectral_norm == doctest::Approx(svd.singularValues()(0)).epsilon(1e-13));
}

TEST_CASE("takagi factorization") {
  const CounterRng rng(45);
  for (std::uint32_t k = 0; k < 300; ++k) {
    const Eigen::Index n = 1 + k % 4;
    const Mat a = random_correlation(rng, k, n, 0.5 + 0.5 * rng.uniform(k, 99));
    const auto t = takagi(a);
    const Mat& v = t.unitary;
    CHECK(diff(Mat(v * t.singular_values.cast<C>().asDiagonal() * v.transpose()), a) <= 1e-10);
    CHECK(diff(Mat(v.adjoint() * v), Mat::Identity(n, n)) <= 1e-10);
    CHECK(t.singular_values.minCoeff() >= 0.0);
    // Takagi values are the singular values.
    Eigen::JacobiSVD<Mat> svd(a);
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(t.singular_values(j) - svd.singularValues()(j)) <= 1e-10);
    }
  }
  SUBCASE("degenerate and rank-deficient inputs") {
    for (const Mat& a : {Mat(Mat::Identity(3, 3)), Mat(Mat::Zero(3, 3)),
                         Mat(C(0, 1) * Mat::Identity(2, 2))}) {
      const auto t = takagi(a);
      const Mat& v = t.unitary;
      CHECK(diff(Mat(v * t.singular_values.cast<C>().asDiagonal() * v.transpose()), a) <= 1e-12);
      CHECK(diff(Mat(v.adjoint() * v), Mat::Identity(a.rows(), a.rows())) <= 1e-12);
    }
    Mat rank_one = Mat::Zero(3, 3);
    const CVector<double> w = complex_gaussian<double>(CounterRng(46), 0, 3).normalized();
    rank_one = 0.7 * w * w.transpose();
    const auto t = takagi(rank_one);
    CHECK(diff(Mat(t.unitary * t.singular_values.cast<C>().asDiagonal() * t.unitary.transpose()),
               rank_one) <= 1e-12);
    CHECK(diff(Mat(t.unitary.adjoint() * t.unitary), Mat::Identity(3, 3)) <= 1e-12);
  }
  CHECK_THROWS_AS(takagi(Mat(Mat::Identity(5, 5))), DimensionError);
}

TEST_CASE("u_from_s") {
  SUBCASE("extreme point s = I") {
    for (Eigen::Index n = 1; n <= 4; ++n) {
      const Mat u = u_from_s(Mat(Mat::Identity(n, n)));
      CHECK(u.rows() == 2 * n);
      CHECK(u.cols() == n);
      CHECK(isometry_defect(u) <= 1e-12);
      CHECK(diff(s_from_u(u), Mat::Identity(n, n)) <= 1e-12);
    }
  }
  SUBCASE("isotropic s = 0") {
    const Mat u = u_from_s(Mat(Mat::Zero(3, 3)));
    CHECK(isometry_defect(u) <= 1e-12);
    CHECK(max_abs(s_from_u(u)) <= 1e-12);
  }
  SUBCASE("round trip on random feasible s") {
    const CounterRng rng(47);
    double worst_s = 0, worst_iso = 0;
    for (std::uint32_t k = 0; k < 1000; ++k) {
      const Eigen::Index n = 1 + k % 4;
      const Mat s = random_correlation(rng, k, n, 0.9);
      const Mat u = u_from_s(s);
      worst_s = std::max(worst_s, diff(s_from_u(u), s));
      worst_iso = std::max(worst_iso, isometry_defect(u));
    }
    CHECK(worst_s <= 1e-10);
    CHECK(worst_iso <= 1e-10);
  }
  SUBCASE("feasibility boundary") {
    const CounterRng rng(48);
    for (std::uint32_t k = 0; k < 50; ++k) {
      const Eigen::Index n = 1 + k % 4;
      const Mat boundary = random_correlation(rng, k, n, 1.0);
      const Mat u = u_from_s(boundary);
      CHECK(diff(s_from_u(u), boundary) <= 1e-10);
      CHECK_THROWS_AS(u_from_s(random_correlation(rng, k, n, 1.0 + 1e-6)), InfeasibleError);
    }
    CHECK_THROWS_AS(u_from_s(Mat(2.0 * Mat::Identity(2, 2))), InfeasibleError);
    Mat skew = Mat::Zero(2, 2);
    skew(0, 1) = 0.5;
    CHECK_THROWS_AS(u_from_s(skew), ValidationError);
  }
}

TEST_CASE("random isometries and orthogonal matrices") {
  const CounterRng rng(49);
  for (std::uint32_t k = 0; k < 50; ++k) {
    CHECK(isometry_defect(random_isometry(rng, k, 4, 2)) <= 1e-14);
    const RMat o = random_orthogonal(rng, k, 4);
    CHECK(max_abs(RMat(o.transpose() * o - RMat::Identity(4, 4))) <= 1e-14);
  }
  CHECK(diff(random_isometry(rng, 3, 3, 2), random_isometry(CounterRng(49), 3, 3, 2)) == 0.0);
}

TEST_CASE("orthogonal redundancy of u") {
  const std::vector<Mat> paulis{pauli(1), pauli(3)};
  const Vec psi0 = random_state(CounterRng(50), 0, 2);

  SUBCASE("O = I") {
    const Mat u = random_isometry(CounterRng(51), 0, 3, 2);
    const auto w = redundancy_witness<double>(u, RMat::Identity(3, 3), Mat::Zero(2, 2), paulis, psi0,
                                              0.1, 1e-3, 7);
    CHECK(w.s_equal);
    CHECK(w.s_deviation == 0.0);
    CHECK(w.max_pathwise_deviation == 0.0);
  }
  SUBCASE("rotation by pi/4, N = 2, n = 1") {
    const double a = std::numbers::pi / 4;
    RMat o(2, 2);
    o << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Mat u = column({1.0, 0.0});
    // One step by hand: (Ou)^T dW = u^T (O^T dW).
    const std::vector<double> dw{0.3, -0.2};
    const Eigen::Vector2d rotated = o.transpose() * Eigen::Vector2d(dw[0], dw[1]);
    const std::vector<double> dv{rotated(0), rotated(1)};
    const Mat ou = o.cast<C>() * u;
    CHECK(std::abs(map_noise(ou, std::span<const double>(dw))(0) -
                   map_noise(u, std::span<const double>(dv))(0)) <= 1e-16);

    const auto w = redundancy_witness<double>(u, o, Mat::Zero(2, 2), {pauli(1)}, psi0, 0.1, 1e-3, 8);
    CHECK(w.s_equal);
    CHECK(w.max_pathwise_deviation <= 1e-12);
  }
  SUBCASE("random O and u, N = 4, n = 2") {
    const CounterRng rng(52);
    Mat h = Mat::Zero(2, 2);
    h << 0.2, C(0, 0.1), C(0, -0.1), -0.2;
    for (std::uint32_t k = 0; k < 20; ++k) {
      const auto w = redundancy_witness<double>(random_isometry(rng, k, 4, 2),
                                                random_orthogonal(rng, 1000 + k, 4), h, paulis,
                                                psi0, 0.1, 1e-3, k);
      CHECK(w.s_equal);
      CHECK(w.max_pathwise_deviation <= 1e-12);
    }
  }
  SUBCASE("invalid inputs") {
    const Mat u = random_isometry(CounterRng(53), 0, 3, 2);
    CHECK_THROWS_AS(redundancy_witness<double>(u, RMat::Constant(3, 3, 1.0), Mat::Zero(2, 2),
                                               paulis, psi0, 0.1, 1e-3, 1),
                    ValidationError);
    CHECK_THROWS_AS(redundancy_witness<double>(u, RMat::Identity(2, 2), Mat::Zero(2, 2), paulis,
                                               psi0, 0.1, 1e-3, 1),
                    DimensionError);
  }
}
