#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "polyflow/flow.hpp"
#include "polyflow/model.hpp"
#include "polyflow/rng.hpp"

using namespace polyflow;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelSpec small_spec() {
  ModelSpec spec;
  spec.coeff_rows = 5;
  spec.coeff_cols = 2;
  spec.cond_dim = 3;
  spec.hidden = {12, 12};
  spec.tau_embed_dim = 4;
  return spec;
}

/// Model forced to emit one constant matrix regardless of input: zero all
/// layers, set the final bias.
VelocityFieldModel constant_model(const ModelSpec& spec, const MatrixXd& out) {
  Rng rng(0);
  VelocityFieldModel model = VelocityFieldModel::init(spec, rng);
  VectorXd theta = VectorXd::Zero(model.param_count());
  model.set_params(theta);
  const int last = model.layer_count() - 1;
  model.set_layer(last, MatrixXd::Zero(spec.output_dim(),
                                       model.weights()[last].cols()),
                  Eigen::Map<const VectorXd>(out.data(), out.size()));
  return model;
}

std::vector<FlowSample> random_batch(const ModelSpec& spec, int n, Rng& rng) {
  std::vector<FlowSample> batch(n);
  for (FlowSample& s : batch) {
    s.source = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
    s.target = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
    s.tau = rng.uniform();
    s.cond = rng.normal_matrix(spec.cond_dim, 1).col(0);
  }
  return batch;
}

}  // namespace

TEST_CASE("straight-line interpolant") {
  Rng rng(1);
  const MatrixXd a = rng.normal_matrix(5, 2);
  const MatrixXd b = rng.normal_matrix(5, 2);

  SUBCASE("endpoints") {
    const auto [c0, v0] = interpolate(a, b, 0.0);
    CHECK((c0 - a).cwiseAbs().maxCoeff() == 0.0);
    const auto [c1, v1] = interpolate(a, b, 1.0);
    CHECK((c1 - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((v0 - (b - a)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero transport when source equals target") {
    for (double tau : {0.0, 0.3, 0.9}) {
      const auto [c, v] = interpolate(a, a, tau);
      CHECK((c - a).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(v.cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("affine in tau: second differences vanish") {
    const int n = 11;
    std::vector<MatrixXd> pts;
    for (int i = 0; i < n; ++i)
      pts.push_back(interpolate(a, b, i / double(n - 1)).first);
    for (int i = 1; i + 1 < n; ++i) {
      const MatrixXd dd = pts[i + 1] - 2.0 * pts[i] + pts[i - 1];
      CHECK(dd.cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("shape mismatch and bad tau are contract errors") {
    CHECK_THROWS_AS(interpolate(a, rng.normal_matrix(4, 2), 0.5),
                    ContractError);
    CHECK_THROWS_AS(interpolate(a, b, -0.1), ContractError);
    CHECK_THROWS_AS(interpolate(a, b, 1.1), ContractError);
  }
}

TEST_CASE("history noise injection") {
  Rng rng(2);
  const MatrixXd c = rng.normal_matrix(5, 2);

  SUBCASE("zero std is the identity") {
    Rng r(3);
    const MatrixXd out = inject_history_noise(c, 0.0, r);
    CHECK((out - c).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("same seed gives the same draw") {
    Rng r1(4), r2(4);
    const MatrixXd a = inject_history_noise(c, 0.5, r1);
    const MatrixXd b = inject_history_noise(c, 0.5, r2);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("sample mean concentrates on the clean value") {
    // Law of large numbers: per entry the mean of n draws sits within
    // 3 sigma / sqrt(n).
    const int n = 100000;
    Rng r(5);
    MatrixXd sum = MatrixXd::Zero(2, 1);
    const MatrixXd base = MatrixXd::Constant(2, 1, 0.7);
    for (int i = 0; i < n; ++i) sum += inject_history_noise(base, 0.5, r);
    const MatrixXd mean = sum / n;
    const double bound = 3.0 * 0.5 / std::sqrt(double(n));
    CHECK((mean - base).cwiseAbs().maxCoeff() < bound);
  }
}

TEST_CASE("flow-matching loss") {
  Rng rng(6);
  const ModelSpec spec = small_spec();
  std::vector<FlowSample> batch = random_batch(spec, 8, rng);

  SUBCASE("perfect field has zero loss") {
    // All samples share one transport so a constant model can be exact.
    const MatrixXd v = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
    for (FlowSample& s : batch) s.target = s.source + v;
    const VelocityFieldModel model = constant_model(spec, v);
    CHECK(fm_loss(model, batch) < 1e-24);
  }

  SUBCASE("zero model scores the mean squared target norm") {
    const VelocityFieldModel model =
        constant_model(spec, MatrixXd::Zero(spec.coeff_rows, spec.coeff_cols));
    double expected = 0.0;
    for (const FlowSample& s : batch)
      expected += (s.target - s.source).squaredNorm();
    expected /= batch.size();
    CHECK(fm_loss(model, batch) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("losses are non-negative") {
    Rng r(7);
    VelocityFieldModel model = VelocityFieldModel::init(spec, r);
    CHECK(fm_loss(model, batch) >= 0.0);
    CHECK(consistency_loss(model, batch) >= 0.0);
  }
}

TEST_CASE("consistency loss") {
  Rng rng(8);
  const ModelSpec spec = small_spec();
  std::vector<FlowSample> batch = random_batch(spec, 8, rng);

  SUBCASE("perfect one-step transport has zero loss") {
    const MatrixXd v = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
    for (FlowSample& s : batch) s.target = s.source + v;
    const VelocityFieldModel model = constant_model(spec, v);
    CHECK(consistency_loss(model, batch) < 1e-24);
  }

  SUBCASE("zero model scores the mean squared prior gap") {
    const VelocityFieldModel model =
        constant_model(spec, MatrixXd::Zero(spec.coeff_rows, spec.coeff_cols));
    double expected = 0.0;
    for (const FlowSample& s : batch)
      expected += (s.source - s.target).squaredNorm();
    expected /= batch.size();
    CHECK(consistency_loss(model, batch) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("total loss composition") {
  Rng rng(9);
  const ModelSpec spec = small_spec();
  const std::vector<FlowSample> batch = random_batch(spec, 6, rng);
  Rng r(10);
  VelocityFieldModel model = VelocityFieldModel::init(spec, r);
  VectorXd theta = model.params();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += 0.02 * r.normal();
  model.set_params(theta);

  const double fm = fm_loss(model, batch);
  const double cons = consistency_loss(model, batch);

  SUBCASE("weight zero degenerates to pure flow matching") {
    CHECK(total_loss(model, batch, 0.0).total == doctest::Approx(fm));
  }
  SUBCASE("unit weight adds the two terms") {
    CHECK(total_loss(model, batch, 1.0).total ==
          doctest::Approx(fm + cons).epsilon(1e-14));
  }
  SUBCASE("monotone in the weight") {
    double prev = -1.0;
    for (double w : {0.0, 0.5, 1.0, 2.0}) {
      const double v = total_loss(model, batch, w).total;
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("Euler inference") {
  Rng rng(11);
  const ModelSpec spec = small_spec();
  const MatrixXd start = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
  const VectorXd cond = rng.normal_matrix(spec.cond_dim, 1).col(0);
  const MatrixXd v = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
  const VelocityFieldModel model = constant_model(spec, v);

  SUBCASE("single step adds the field once") {
    const MatrixXd out = euler_infer(model, start, cond, 1);
    CHECK((out - (start + v)).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("a constant field integrates exactly for any step count") {
    for (int nfe : {2, 4, 10, 37}) {
      const MatrixXd out = euler_infer(model, start, cond, nfe);
      CHECK((out - (start + v)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("one-step sufficiency under a perfect transport field") {
    // If the model equals target - source everywhere, one step lands on
    // the target exactly.
    const MatrixXd target = rng.normal_matrix(spec.coeff_rows, spec.coeff_cols);
    const VelocityFieldModel exact = constant_model(spec, target - start);
    const MatrixXd out = euler_infer(exact, start, cond, 1);
    CHECK((out - target).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("invalid step counts are rejected") {
    CHECK_THROWS_AS(euler_infer(model, start, cond, 0), ParamError);
  }
}

TEST_CASE("training step aborts on a non-finite loss without updating") {
  Rng rng(12);
  const ModelSpec spec = small_spec();
  VelocityFieldModel model = VelocityFieldModel::init(spec, rng);
  AdamState opt = AdamState::zeros(model.param_count());
  std::vector<FlowSample> batch = random_batch(spec, 2, rng);
  batch[0].target(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const VectorXd before = model.params();
  CHECK_THROWS_AS(train_step(model, batch, opt, TrainConfig{}, 1.0),
                  DivergenceError);
  CHECK((model.params() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("divergence errors carry the batch index") {
  Rng rng(13);
  const ModelSpec spec = small_spec();
  // A poisoned source propagates NaN through the forward pass.
  VelocityFieldModel model = VelocityFieldModel::init(spec, rng);
  VectorXd theta = model.params();
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    theta(i) += 0.02 * rng.normal();
  model.set_params(theta);
  std::vector<FlowSample> batch = random_batch(spec, 4, rng);
  batch[2].source(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    fm_loss(model, batch);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}
