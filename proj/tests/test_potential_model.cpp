#include "gradflow/error.hpp"
#include "gradflow/potential_model.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

using namespace gradflow;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v)
{
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) { out(i++) = x; }
  return out;
}

/// planes (x=0, theta=0, xi=0) and (x=1, theta=0, xi=1) in one dimension
MaxAffinePotential two_plane_model()
{
  MatrixXd anchors(2, 1), slopes(2, 1);
  anchors << 0, 1;
  slopes << 0, 1;
  return MaxAffinePotential(anchors, VectorXd::Zero(2), slopes);
}

MaxAffinePotential single_plane(const VectorXd& anchor, double height, const VectorXd& slope)
{
  return MaxAffinePotential(anchor.transpose(), VectorXd::Constant(1, height), slope.transpose());
}

}  // namespace

TEST_CASE("exact evaluation")
{
  CHECK(single_plane(vec({0, 0}), 0, vec({0, 0})).eval(vec({3, -4})) == 0);
  const auto m = two_plane_model();
  CHECK(m.eval(vec({2})) == 1);
  CHECK(m.eval(vec({0})) == 0);
  CHECK_THROWS_AS(m.eval(vec({1, 2})), Error);
}

TEST_CASE("active planes")
{
  const auto single = single_plane(vec({1, 1}), 2, vec({1, -1}));
  CHECK(single.active_planes(vec({5, 0}), 0) == std::vector<Index>{0});
  const auto m = two_plane_model();
  CHECK(m.active_planes(vec({0}), 1e-12) == std::vector<Index>{0});
  CHECK(m.active_planes(vec({1}), 1e-12) == std::vector<Index>{0, 1});
  CHECK_THROWS_AS(m.active_planes(vec({0}), -1), Error);
}

TEST_CASE("smoothed value")
{
  SUBCASE("single plane is exact at any tau")
  {
    const auto p = single_plane(vec({0.5}), 0.3, vec({-2}));
    for (double tau : {1e-4, 0.1, 10.0}) { CHECK(p.eval_smoothed(tau, vec({1.5})) == doctest::Approx(0.3 - 2.0)); }
  }
  SUBCASE("two planes at the origin, tau = 1")
  {
    CHECK(two_plane_model().eval_smoothed(1.0, vec({0})) == doctest::Approx(std::log((1 + std::exp(-1.0)) / 2)).epsilon(1e-14));
    CHECK(two_plane_model().eval_smoothed(1.0, vec({0})) == doctest::Approx(-0.37988).epsilon(1e-5));
  }
  SUBCASE("no overflow at tiny tau")
  {
    const auto m = two_plane_model();
    CHECK(std::isfinite(m.eval_smoothed(1e-6, vec({50}))));
    CHECK(m.eval_smoothed(1e-6, vec({50})) <= m.eval(vec({50})));
  }
  SUBCASE("tau must be positive")
  {
    CHECK_THROWS_AS(two_plane_model().eval_smoothed(0, vec({0})), Error);
  }
}

TEST_CASE("smoothed gradient and softmax weights")
{
  const auto p = single_plane(vec({0, 0}), 0, vec({0.4, -0.7}));
  CHECK(p.grad_smoothed(0.3, vec({1, 1})).isApprox(vec({0.4, -0.7})));

  const VectorXd g = two_plane_model().grad_smoothed(1.0, vec({0}));
  CHECK(g(0) == doctest::Approx(std::exp(-1.0) / (1 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(g(0) == doctest::Approx(0.26894).epsilon(1e-5));

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto m      = testing::random_model(rng, 12, 3);
    const VectorXd x  = testing::random_vector(rng, 3, -2, 2);
    const VectorXd w  = m.softmax_weights(0.2, x);
    CHECK(w.minCoeff() >= 0);
    CHECK(std::abs(w.sum() - 1) <= 1e-12);
  }
}

TEST_CASE("gradient matches central differences")
{
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto m      = testing::random_model(rng, 10, 2);
    const double tau  = 0.5;
    const VectorXd x  = testing::random_vector(rng, 2, -2, 2);
    const VectorXd fd = testing::fd_gradient([&](const VectorXd& z) { return m.eval_smoothed(tau, z); }, x, 1e-5);
    const VectorXd g  = m.grad_smoothed(tau, x);
    CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("Hessian matches differences of the gradient and is PSD")
{
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const auto m     = testing::random_model(rng, 10, 3);
    const double tau = 0.5;
    const VectorXd x = testing::random_vector(rng, 3, -2, 2);
    const MatrixXd J = testing::fd_jacobian([&](const VectorXd& z) { return m.grad_smoothed(tau, z); }, x, 1e-5);
    const MatrixXd H = m.hessian_smoothed(tau, x);
    CHECK((H - J).lpNorm<Eigen::Infinity>() <= 1e-5);
    CHECK((H - H.transpose()).norm() <= 1e-14);
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(H).eigenvalues().minCoeff() >= -1e-10);
  }
  SUBCASE("degenerate cases are zero")
  {
    CHECK(single_plane(vec({0, 0}), 1, vec({1, 2})).hessian_smoothed(0.1, vec({0.3, 0.3})).norm() == 0);
    MatrixXd anchors = testing::random_matrix(rng, 5, 2);
    MatrixXd slopes  = MatrixXd::Ones(5, 2);
    const MaxAffinePotential shared(anchors, testing::random_vector(rng, 5), slopes);
    CHECK(shared.hessian_smoothed(0.1, vec({0.2, -0.1})).norm() <= 1e-12);
  }
}

TEST_CASE("sign flips value, gradient and Hessian")
{
  std::mt19937_64 rng(4);
  const auto m = testing::random_model(rng, 6, 2);
  const MaxAffinePotential neg(m.anchors(), m.heights(), m.slopes(), -1);
  const VectorXd x = vec({0.3, -0.2});
  CHECK(neg.eval(x) == -m.eval(x));
  CHECK(neg.grad_smoothed(0.2, x).isApprox(-m.grad_smoothed(0.2, x)));
  CHECK(neg.hessian_smoothed(0.2, x).isApprox(-m.hessian_smoothed(0.2, x)));
  CHECK(predict_field(neg, 0.2, x).isApprox(m.grad_smoothed(0.2, x)));
}

TEST_CASE("max-affine functions are convex")
{
  std::mt19937_64 rng(5);
  const auto m = testing::random_model(rng, 15, 2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    const VectorXd x = testing::random_vector(rng, 2, -3, 3), y = testing::random_vector(rng, 2, -3, 3);
    const double s   = u(rng);
    CHECK(m.eval(s * x + (1 - s) * y) <= s * m.eval(x) + (1 - s) * m.eval(y) + 1e-12);
  }
}

TEST_CASE("smoothing sandwich")
{
  std::mt19937_64 rng(6);
  for (double tau : {1e-3, 0.05, 0.5}) {
    const auto m = testing::random_model(rng, 20, 2);
    for (int t = 0; t < 500; ++t) {
      const VectorXd x  = testing::random_vector(rng, 2, -3, 3);
      const double slack = m.eval(x) - m.eval_smoothed(tau, x);
      CHECK(slack >= -1e-10);
      CHECK(slack <= tau * std::log(20.0) + 1e-10);
    }
  }
}

TEST_CASE("difference-of-convex models")
{
  std::mt19937_64 rng(7);
  const auto a = testing::random_model(rng, 8, 2);
  const auto b = testing::random_model(rng, 8, 2);

  SUBCASE("identical pieces cancel")
  {
    const DcPotential zero(a, a);
    const VectorXd x = vec({0.4, 0.1});
    CHECK(zero.eval(x) == 0);
    CHECK(zero.grad_smoothed(0.1, x).norm() == 0);
  }
  SUBCASE("sandwich on the difference")
  {
    const DcPotential dc(a, b);
    const double tau = 0.05;
    for (int t = 0; t < 200; ++t) {
      const VectorXd x = testing::random_vector(rng, 2, -3, 3);
      CHECK(std::abs(dc.eval(x) - dc.eval_smoothed(tau, x)) <= 2 * tau * std::log(8.0) + 1e-10);
    }
  }
  SUBCASE("parametric part enters the field")
  {
    const DcPotential dc(a, b, vec({2.0}), make_basis({"rotation:0:1"}, 2));
    const VectorXd x = vec({0.5, -1});
    // rotation:0:1 is x_1 e_0 - x_0 e_1
    CHECK(dc.parametric_field(x).isApprox(2.0 * vec({-1, -0.5})));
    CHECK(predict_field(dc, 0.1, x).isApprox(-dc.grad_smoothed(0.1, x) + dc.parametric_field(x)));
  }
  SUBCASE("shape checks")
  {
    CHECK_THROWS_AS(DcPotential(a, testing::random_model(rng, 3, 3)), Error);
    CHECK_THROWS_AS(DcPotential(a, b, vec({1, 2}), make_basis({"const:0"}, 2)), Error);
  }
}

TEST_CASE("single-plane convex fit predicts its sample everywhere")
{
  const VectorXd y = vec({0.7, -1.2});
  const auto m     = single_plane(vec({0.1, 0.2}), 0, -y);
  for (const auto& x : {vec({0, 0}), vec({5, -5}), vec({-1, 3})}) { CHECK(predict_field(m, 0.01, x).isApprox(y)); }
}

TEST_CASE("tau for a target accuracy")
{
  CHECK(tau_for_accuracy(0.1, 118, false) == doctest::Approx(0.99 * 0.1 / std::log(118.0)));
  CHECK(tau_for_accuracy(0.1, 118, false) == doctest::Approx(0.020754).epsilon(1e-4));
  CHECK(tau_for_accuracy(0.1, 118, true) == doctest::Approx(0.010377).epsilon(1e-4));
  CHECK_THROWS_AS(tau_for_accuracy(0.1, 1, false), Error);
  CHECK_THROWS_AS(tau_for_accuracy(0, 5, false), Error);

  std::mt19937_64 rng(8);
  for (double eps : {1e-3, 1e-2, 0.1}) {
    const auto m     = testing::random_model(rng, 30, 2);
    const double tau = tau_for_accuracy(eps, 30, false);
    double gap       = 0;
    for (int i = 0; i < 50; ++i) {
      const VectorXd x = vec({-2 + 4.0 * (i % 10) / 9, -2 + 4.0 * (i / 10) / 4});
      gap              = std::max(gap, std::abs(m.eval(x) - m.eval_smoothed(tau, x)));
    }
    CHECK(gap <= eps);
  }
}

TEST_CASE("model JSON round trip is lossless")
{
  std::mt19937_64 rng(9);
  const auto m     = testing::random_model(rng, 7, 3);
  const auto back  = max_affine_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back == m);

  const MaxAffinePotential neg(m.anchors(), m.heights(), m.slopes(), -1);
  CHECK(max_affine_from_json(to_json(neg)).sign() == -1);

  const DcPotential dc(m, testing::random_model(rng, 7, 3), vec({0.25}), make_basis({"linear:1:2"}, 3));
  const auto dc_back = dc_from_json(nlohmann::json::parse(to_json(dc).dump()));
  CHECK(dc_back.phi1() == dc.phi1());
  CHECK(dc_back.phi2() == dc.phi2());
  CHECK(dc_back.alpha() == dc.alpha());
  CHECK(basis_names(dc_back.basis()) == basis_names(dc.basis()));
  const VectorXd x = vec({0.1, 0.2, 0.3});
  CHECK(predict_field(dc_back, 0.1, x) == predict_field(dc, 0.1, x));

  auto doc      = to_json(m);
  doc["kind"]   = "dc";
  CHECK_THROWS_AS(max_affine_from_json(doc), Error);
  auto short_row = to_json(m);
  short_row["slopes"][0] = {1.0};
  CHECK_THROWS_AS(max_affine_from_json(short_row), Error);
}

TEST_CASE("basis names")
{
  CHECK_THROWS_AS(make_basis_field("spiral:0", 2), Error);
  CHECK_THROWS_AS(make_basis_field("const:2", 2), Error);
  const auto lin = make_basis_field("linear:0:1", 2);
  CHECK(lin.eval(vec({3, 4})).isApprox(vec({4, 0})));
}

TEST_CASE("constructor rejects bad shapes")
{
  CHECK_THROWS_AS(MaxAffinePotential(MatrixXd::Zero(2, 2), VectorXd::Zero(3), MatrixXd::Zero(2, 2)), Error);
  CHECK_THROWS_AS(MaxAffinePotential(MatrixXd::Zero(2, 2), VectorXd::Zero(2), MatrixXd::Zero(2, 2), 0), Error);
  VectorXd h = VectorXd::Zero(2);
  h(1)       = std::nan("");
  CHECK_THROWS_AS(MaxAffinePotential(MatrixXd::Zero(2, 2), h, MatrixXd::Zero(2, 2)), Error);
}
