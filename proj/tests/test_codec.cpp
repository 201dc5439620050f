#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "polyflow/codec.hpp"
#include "polyflow/rng.hpp"
#include "polyflow/sim.hpp"

using namespace polyflow;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

FitWindowConfig default_window() {
  FitWindowConfig cfg;  // exec 8, overlaps 2/2, padding 1, stride 4, 50 Hz
  return cfg;
}

Trajectory smooth_expert(int steps, int dims, double hz, Rng& rng) {
  Trajectory traj;
  traj.frequency = hz;
  traj.samples.resize(steps, dims);
  for (int j = 0; j < dims; ++j) {
    const double a = rng.uniform(0.3, 0.9);
    const double w = rng.uniform(0.5, 2.0);
    const double p = rng.uniform(0.0, 2.0 * M_PI);
    const double slope = rng.uniform(-0.2, 0.2);
    for (int i = 0; i < steps; ++i) {
      const double t = i / hz;
      traj.samples(i, j) = a * std::sin(w * t + p) + slope * t;
    }
  }
  return traj;
}

double fit_residual(const BasisMatrix& S, const MatrixXd& coeffs,
                    const MatrixXd& targets) {
  return (S.values * coeffs - targets).norm();
}

}  // namespace

TEST_CASE("sparse node extraction") {
  Rng rng(1);
  const Trajectory expert = smooth_expert(400, 2, 50.0, rng);

  SUBCASE("stride-1 no-overlap window degenerates to a plain chunk") {
    FitWindowConfig cfg;
    cfg.exec_steps = 8;
    cfg.overlap_pre = cfg.overlap_post = 0;
    cfg.fit_padding = 0;
    cfg.stride = 1;
    const long t = 30;
    const Trajectory nodes = extract_sparse_nodes(expert, cfg, t);
    CHECK(nodes.steps() == 8);
    CHECK(nodes.start_step == t + 1);
    CHECK(cfg.coverage_steps(cfg.stride) == 8);
    for (int i = 0; i < 8; ++i)
      CHECK((nodes.samples.row(i) - expert.samples.row(t + 1 + i)).norm() ==
            0.0);
  }

  SUBCASE("stride-4 window with 16 nodes covers 64 expert steps") {
    FitWindowConfig cfg = default_window();
    cfg.exec_steps = 10;  // horizon: 1+2+10+2+1 = 16
    REQUIRE(cfg.horizon() == 16);
    const long t = 60;
    const Trajectory nodes = extract_sparse_nodes(expert, cfg, t);
    CHECK(nodes.steps() == 16);
    CHECK(cfg.coverage_steps(cfg.stride) == 64);
    // node grid itself spans stride*(horizon-1) steps
    CHECK(nodes.frequency == doctest::Approx(expert.frequency / cfg.stride));
    CHECK(nodes.span_seconds() ==
          doctest::Approx(cfg.stride * (cfg.horizon() - 1) /
                          expert.frequency));
    for (int i = 0; i < 16; ++i) {
      const long step = t + 1 + cfg.stride * (i - 3);
      CHECK((nodes.samples.row(i) - expert.samples.row(step)).norm() == 0.0);
    }
  }

  SUBCASE("window past the end of the recording") {
    const FitWindowConfig cfg = default_window();
    CHECK_THROWS_AS(extract_sparse_nodes(expert, cfg, 395),
                    InsufficientDataError);
    CHECK_THROWS_AS(extract_sparse_nodes(expert, cfg, 2),
                    InsufficientDataError);
  }
}

TEST_CASE("ordinary least squares fit") {
  const FitWindowConfig cfg = default_window();
  const int h = cfg.horizon();
  const BasisMatrix S = basis_matrix(unit_grid(h), 6, /*for_fitting=*/true);
  Rng rng(2);

  SUBCASE("exact recovery of an in-span polynomial") {
    const MatrixXd truth = rng.normal_matrix(7, 3);
    Trajectory nodes;
    nodes.samples = S.values * truth;
    nodes.frequency = cfg.expert_hz / cfg.stride;
    const CoeffMatrix fit = ols_fit(nodes, S, cfg);
    CHECK((fit.values - truth).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("zero targets give zero coefficients") {
    Trajectory nodes;
    nodes.samples = MatrixXd::Zero(h, 2);
    nodes.frequency = 1.0;
    const CoeffMatrix fit = ols_fit(nodes, S, cfg);
    CHECK(fit.values.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("degree-8 samples: residual matches an independent QR solve") {
    Trajectory nodes;
    nodes.samples.resize(h, 1);
    for (int i = 0; i < h; ++i) {
      const double x = 2.0 * S.nodes(i) - 1.0;
      nodes.samples(i, 0) = std::pow(x, 8) - 0.4 * std::pow(x, 7) + 0.1 * x;
    }
    nodes.frequency = 1.0;
    const CoeffMatrix fit = ols_fit(nodes, S, cfg);
    // Independent route: rank-revealing QR on the rectangular system.
    const MatrixXd oracle =
        S.values.colPivHouseholderQr().solve(nodes.samples);
    const double r_fit = fit_residual(S, fit.values, nodes.samples);
    const double r_oracle = fit_residual(S, oracle, nodes.samples);
    CHECK(r_fit == doctest::Approx(r_oracle).epsilon(1e-8));
    CHECK(r_fit > 1e-6);  // genuinely out of span
  }

  SUBCASE("row-count mismatch is a contract error") {
    Trajectory nodes;
    nodes.samples = MatrixXd::Zero(h - 1, 2);
    nodes.frequency = 1.0;
    CHECK_THROWS_AS(ols_fit(nodes, S, cfg), ContractError);
  }
}

TEST_CASE("anchor constraint construction") {
  Rng rng(3);
  const Trajectory expert = smooth_expert(400, 2, 50.0, rng);
  const long t = 60;

  SUBCASE("position-only anchors, r=0") {
    FitWindowConfig cfg = default_window();
    cfg.continuity_order = 0;
    const AnchorConstraints ac = build_anchor_constraints(expert, cfg, 6, t);
    REQUIRE(ac.A.rows() == 2);
    CHECK((ac.A.row(0).transpose() - eval_basis(ac.s_front, 6)).norm() == 0.0);
    CHECK((ac.A.row(1).transpose() - eval_basis(ac.s_rear, 6)).norm() == 0.0);
    CHECK((ac.b.row(0) - expert.samples.row(t + 1)).norm() == 0.0);
    CHECK((ac.b.row(1) -
           expert.samples.row(t + 1 + cfg.exec_expert_steps())).norm() == 0.0);
  }

  SUBCASE("velocity anchors, r=1, degree 6") {
    const FitWindowConfig cfg = default_window();
    const AnchorConstraints ac = build_anchor_constraints(expert, cfg, 6, t);
    REQUIRE(ac.A.rows() == 4);
    CHECK(ac.A.cols() == 7);
    CHECK((ac.A.row(1).transpose() - eval_basis_derivative(ac.s_front, 6))
              .norm() == 0.0);
    // derivative targets are the expert finite differences mapped onto the
    // normalized axis through the node-grid span
    const double span = cfg.node_span_seconds();
    const VectorXd fd = (expert.samples.row(t + 2) - expert.samples.row(t))
                            .transpose() *
                        (0.5 * expert.frequency);
    CHECK((ac.b.row(1).transpose() - fd * span).norm() < 1e-12);
  }

  SUBCASE("infeasible continuity order") {
    FitWindowConfig cfg = default_window();
    cfg.continuity_order = 6;
    CHECK_THROWS_AS(build_anchor_constraints(expert, cfg, 6, t),
                    InfeasibleConstraintError);
  }
}

TEST_CASE("KKT correction") {
  const FitWindowConfig cfg = default_window();
  const int h = cfg.horizon();
  const BasisMatrix S = basis_matrix(unit_grid(h), 6, /*for_fitting=*/true);
  Rng rng(4);

  const auto random_anchors = [&](Rng& r) {
    AnchorConstraints ac;
    ac.s_front = r.uniform(0.05, 0.4);
    ac.s_rear = r.uniform(0.6, 0.95);
    ac.A.resize(4, 7);
    ac.A.row(0) = eval_basis(ac.s_front, 6).transpose();
    ac.A.row(1) = eval_basis_derivative(ac.s_front, 6).transpose();
    ac.A.row(2) = eval_basis(ac.s_rear, 6).transpose();
    ac.A.row(3) = eval_basis_derivative(ac.s_rear, 6).transpose();
    ac.b = r.normal_matrix(4, 3);
    return ac;
  };

  SUBCASE("already-feasible fit is unchanged") {
    const AnchorConstraints ac = random_anchors(rng);
    // Build a fit that already satisfies A C = b: least-norm solution.
    CoeffMatrix fit;
    fit.values = ac.A.colPivHouseholderQr().solve(ac.b);
    fit.window = cfg;
    REQUIRE((ac.A * fit.values - ac.b).cwiseAbs().maxCoeff() < 1e-10);
    const CoeffMatrix corrected = kkt_correct(fit, S, ac);
    CHECK((corrected.values - fit.values).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("constraints hold after correction") {
    for (int i = 0; i < 50; ++i) {
      const AnchorConstraints ac = random_anchors(rng);
      CoeffMatrix fit;
      fit.values = rng.normal_matrix(7, 3);
      fit.window = cfg;
      const CoeffMatrix corrected = kkt_correct(fit, S, ac);
      CHECK((ac.A * corrected.values - ac.b).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  SUBCASE("no null-space perturbation improves the fit residual") {
    for (int i = 0; i < 20; ++i) {
      const AnchorConstraints ac = random_anchors(rng);
      Trajectory nodes;
      nodes.samples = rng.normal_matrix(h, 3);
      nodes.frequency = 1.0;
      const CoeffMatrix fit = ols_fit(nodes, S, cfg);
      const CoeffMatrix corrected = kkt_correct(fit, S, ac);
      const double base = fit_residual(S, corrected.values, nodes.samples);
      const MatrixXd kernel = Eigen::FullPivLU<MatrixXd>(ac.A).kernel();
      for (int p = 0; p < 200; ++p) {
        const MatrixXd z = rng.normal_matrix(kernel.cols(), 3);
        const double perturbed = fit_residual(
            S, corrected.values + kernel * z, nodes.samples);
        CHECK(perturbed >= base - 1e-10);
      }
    }
  }

  SUBCASE("coinciding anchors are degenerate") {
    AnchorConstraints ac;
    ac.s_front = ac.s_rear = 0.5;
    ac.A.resize(4, 7);
    ac.A.row(0) = eval_basis(0.5, 6).transpose();
    ac.A.row(1) = eval_basis_derivative(0.5, 6).transpose();
    ac.A.row(2) = ac.A.row(0);
    ac.A.row(3) = ac.A.row(1);
    ac.b = MatrixXd::Zero(4, 3);
    CoeffMatrix fit;
    fit.values = rng.normal_matrix(7, 3);
    fit.window = cfg;
    CHECK_THROWS_AS(kkt_correct(fit, S, ac), DegenerateAnchorError);
  }
}

TEST_CASE("history ridge fit") {
  const FitWindowConfig cfg = default_window();

  SUBCASE("matches the closed-form ridge oracle on a constant design") {
    // Oracle values computed with an independent dense solve (full-pivot LU
    // on the regularized normal equations).
    const int t_o = 32;
    const double c = 2.5;
    Trajectory hist;
    hist.samples = MatrixXd::Constant(t_o, 1, c);
    hist.frequency = 50.0;
    const CoeffMatrix fit = fit_history(hist, 6, 0.1, cfg);

    const BasisMatrix S = basis_matrix(unit_grid(t_o), 6);
    MatrixXd lhs = S.values.transpose() * S.values;
    lhs.diagonal().array() += 0.1;
    const MatrixXd oracle = Eigen::FullPivLU<MatrixXd>(lhs).solve(
        S.values.transpose() * hist.samples);
    CHECK((fit.values - oracle).cwiseAbs().maxCoeff() < 1e-10);

    // Odd orders vanish by grid symmetry; even orders carry only the small
    // discrete-grid coupling (~1.9e-3 at 32 nodes per the oracle).
    CHECK(std::abs(fit.values(1, 0)) < 1e-9);
    CHECK(std::abs(fit.values(3, 0)) < 1e-9);
    CHECK(std::abs(fit.values(5, 0)) < 1e-9);
    for (int j = 1; j <= 6; ++j) CHECK(std::abs(fit.values(j, 0)) < 5e-3);

    const auto [pos, vel] = decode(fit, unit_grid(t_o), 1.0);
    CHECK((pos.samples.array() - c).abs().maxCoeff() / c < 0.02);
  }

  SUBCASE("vanishing ridge matches plain least squares") {
    Rng rng(5);
    Trajectory hist;
    hist.samples = rng.normal_matrix(40, 2);
    hist.frequency = 50.0;
    const CoeffMatrix ridge = fit_history(hist, 6, 1e-12, cfg);
    const BasisMatrix S = basis_matrix(unit_grid(40), 6, /*for_fitting=*/true);
    const CoeffMatrix ols = ols_fit(hist, S, cfg);
    CHECK((ridge.values - ols.values).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("two-sample history stays bounded") {
    Trajectory hist;
    hist.samples.resize(2, 1);
    hist.samples << 3.0, 1.0;
    hist.frequency = 50.0;
    const CoeffMatrix fit = fit_history(hist, 6, 0.1, cfg);
    CHECK(fit.values.allFinite());
    CHECK(fit.values.norm() <=
          hist.samples.norm() * std::sqrt(2.0) / 0.1 + 1e-12);
  }

  SUBCASE("ridge weight must be strictly positive") {
    Trajectory hist;
    hist.samples = MatrixXd::Zero(4, 1);
    hist.frequency = 50.0;
    CHECK_THROWS_AS(fit_history(hist, 6, 0.0, cfg), ParamError);
    CHECK_THROWS_AS(fit_history(hist, 6, -0.1, cfg), ParamError);
  }

  SUBCASE("coefficient norm is non-increasing in the ridge weight") {
    Rng rng(6);
    Trajectory hist;
    hist.samples = rng.normal_matrix(10, 3);
    hist.frequency = 50.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double lam : {1e-3, 1e-2, 1e-1, 1.0, 1e1}) {
      const double norm = fit_history(hist, 6, lam, cfg).values.norm();
      CHECK(norm <= prev + 1e-12);
      prev = norm;
    }
  }
}

TEST_CASE("scale normalizer") {
  const FitWindowConfig cfg = default_window();
  Rng rng(7);

  SUBCASE("zero-variance rows hit the floor") {
    CoeffMatrix c;
    c.values = rng.normal_matrix(7, 1);  // one column: rows have no spread
    c.window = cfg;
    const std::vector<CoeffMatrix> corpus(5, c);
    const ScaleNormalizer n = fit_normalizer(corpus);
    for (int j = 0; j <= 6; ++j) CHECK(n.scales(j) == doctest::Approx(1e-6));
  }

  SUBCASE("row scale equals the population deviation") {
    CoeffMatrix a, b;
    a.values = MatrixXd::Zero(7, 1);
    b.values = MatrixXd::Zero(7, 1);
    a.values(0, 0) = 2.0;  // row 0 holds {2, -2}: std 2
    b.values(0, 0) = -2.0;
    a.window = b.window = cfg;
    const ScaleNormalizer n = fit_normalizer({a, b});
    CHECK(n.scales(0) == doctest::Approx(2.0));
    const CoeffMatrix an = n.normalize(a);
    const CoeffMatrix bn = n.normalize(b);
    const double mean = 0.5 * (an.values(0, 0) + bn.values(0, 0));
    const double var = 0.5 * (std::pow(an.values(0, 0) - mean, 2) +
                              std::pow(bn.values(0, 0) - mean, 2));
    CHECK(std::sqrt(var) == doctest::Approx(1.0));
  }

  SUBCASE("normalize/denormalize round-trips to 1e-12") {
    std::vector<CoeffMatrix> corpus;
    for (int i = 0; i < 8; ++i) {
      CoeffMatrix c;
      c.values = rng.normal_matrix(7, 3, 2.0);
      c.window = cfg;
      corpus.push_back(c);
    }
    const ScaleNormalizer n = fit_normalizer(corpus);
    for (const CoeffMatrix& c : corpus) {
      const CoeffMatrix back = n.denormalize(n.normalize(c));
      CHECK((back.values - c.values).cwiseAbs().maxCoeff() < 1e-12);
      CHECK_FALSE(back.normalized);
    }
  }

  SUBCASE("double normalization is rejected") {
    CoeffMatrix c;
    c.values = rng.normal_matrix(7, 1);
    c.window = cfg;
    const ScaleNormalizer n = fit_normalizer({c});
    const CoeffMatrix cn = n.normalize(c);
    CHECK_THROWS_AS(n.normalize(cn), ContractError);
    CHECK_THROWS_AS(n.denormalize(c), ContractError);
  }
}

TEST_CASE("decoding positions and velocities") {
  const FitWindowConfig cfg = default_window();

  SUBCASE("constant coefficients decode to a constant at rest") {
    CoeffMatrix c;
    c.values = MatrixXd::Zero(7, 2);
    c.values.row(0) << 1.5, -0.25;
    c.window = cfg;
    const auto [pos, vel] = decode(c, unit_grid(11), 2.0);
    for (int i = 0; i < 11; ++i) {
      CHECK(pos.samples(i, 0) == doctest::Approx(1.5));
      CHECK(pos.samples(i, 1) == doctest::Approx(-0.25));
      CHECK(vel.samples.row(i).norm() == doctest::Approx(0.0));
    }
  }

  SUBCASE("linear component decodes to the analytic line") {
    const double c1 = 0.8, span = 2.5;
    CoeffMatrix c;
    c.values = MatrixXd::Zero(7, 1);
    c.values(1, 0) = c1;
    c.window = cfg;
    const VectorXd grid = unit_grid(9);
    const auto [pos, vel] = decode(c, grid, span);
    for (int i = 0; i < 9; ++i) {
      CHECK(pos.samples(i, 0) == doctest::Approx(c1 * (2.0 * grid(i) - 1.0)));
      CHECK(vel.samples(i, 0) == doctest::Approx(2.0 * c1 / span));
    }
  }

  SUBCASE("velocities match finite differences of positions") {
    Rng rng(8);
    CoeffMatrix c;
    c.values = rng.normal_matrix(7, 2);
    c.window = cfg;
    const double span = 1.12;
    const int n = 10000;
    const VectorXd grid = unit_grid(n);
    const auto [pos, vel] = decode(c, grid, span);
    const double dt = span / (n - 1);
    for (int i = 1; i + 1 < n; i += 97) {
      for (int j = 0; j < 2; ++j) {
        const double fd =
            (pos.samples(i + 1, j) - pos.samples(i - 1, j)) / (2.0 * dt);
        CHECK(std::abs(vel.samples(i, j) - fd) / std::max(1.0, std::abs(fd)) <
              1e-4);
      }
    }
  }

  SUBCASE("normalized coefficients must be denormalized first") {
    CoeffMatrix c;
    c.values = MatrixXd::Zero(7, 1);
    c.window = cfg;
    c.normalized = true;
    CHECK_THROWS_AS(decode(c, unit_grid(4), 1.0), ContractError);
  }

  SUBCASE("decode grid must stay inside [0,1]") {
    CoeffMatrix c;
    c.values = MatrixXd::Zero(7, 1);
    c.window = cfg;
    const VectorXd bad = (VectorXd(2) << 0.5, 1.2).finished();
    CHECK_THROWS_AS(decode(c, bad, 1.0), DomainError);
  }
}

TEST_CASE("execution slice and speed modulation") {
  const FitWindowConfig cfg = default_window();
  Rng rng(9);
  CoeffMatrix c;
  c.values = rng.normal_matrix(7, 2);
  c.window = cfg;

  SUBCASE("training stride reproduces the execution subinterval") {
    const auto [pos, vel] = execution_slice(c, cfg.stride, 1000.0);
    const double span = cfg.span_seconds(cfg.stride);
    const VectorXd grid =
        VectorXd::LinSpaced(pos.steps(), cfg.s_front(), cfg.s_rear());
    const auto [pos_ref, vel_ref] = decode(c, grid, span);
    CHECK((pos.samples - pos_ref.samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK((vel.samples - vel_ref.samples).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("doubling the stride halves velocities at matched s") {
    const int n = 201;
    const double span_train = cfg.span_seconds(cfg.stride);
    const double span_slow = cfg.span_seconds(2.0 * cfg.stride);
    const VectorXd grid = VectorXd::LinSpaced(n, cfg.s_front(), cfg.s_rear());
    const auto [pos_a, vel_a] = decode(c, grid, span_train);
    const auto [pos_b, vel_b] = decode(c, grid, span_slow);
    // positions at matched s are bit-identical; velocities exactly halve
    CHECK((pos_a.samples - pos_b.samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK((vel_a.samples - 2.0 * vel_b.samples).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("k_eval=8 against k_train=4 doubles the execution duration") {
    const auto [pos_a, vel_a] = execution_slice(c, 4.0, 1000.0);
    const auto [pos_b, vel_b] = execution_slice(c, 8.0, 1000.0);
    const double dur_a = (pos_a.steps() - 1) / pos_a.frequency;
    const double dur_b = (pos_b.steps() - 1) / pos_b.frequency;
    CHECK(dur_b == doctest::Approx(2.0 * dur_a).epsilon(1e-2));
  }
}

TEST_CASE("chained windows keep junctions continuous to first order") {
  // Expert with content a degree-6 window cannot absorb exactly, so the
  // anchors have real work to do.
  Rng rng(10);
  Trajectory expert;
  expert.frequency = 50.0;
  expert.samples.resize(600, 2);
  for (int j = 0; j < 2; ++j) {
    const double p = rng.uniform(0.0, 2.0 * M_PI);
    for (int i = 0; i < 600; ++i) {
      const double t = i / expert.frequency;
      expert.samples(i, j) =
          0.6 * std::sin(1.3 * t + p) + 0.08 * std::sin(11.0 * t + 2.0 * p);
    }
  }
  const FitWindowConfig cfg = default_window();

  const long t0 = rollout_initial_anchor(cfg, 4);
  const int segments = 10;
  REQUIRE(max_rollout_steps(expert, cfg, t0) >=
          segments * cfg.exec_expert_steps());
  const std::vector<CoeffMatrix> chain =
      fit_chain(expert, cfg, 6, t0, segments);

  const double span = cfg.span_seconds(cfg.stride);
  const VectorXd rear = (VectorXd(1) << cfg.s_rear()).finished();
  const VectorXd front = (VectorXd(1) << cfg.s_front()).finished();
  for (int i = 0; i + 1 < segments; ++i) {
    const auto [pos_a, vel_a] = decode(chain[i], rear, span);
    const auto [pos_b, vel_b] = decode(chain[i + 1], front, span);
    CHECK((pos_a.samples - pos_b.samples).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((vel_a.samples - vel_b.samples).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("uncorrected fits leave visible junction gaps") {
    double max_gap = 0.0;
    for (int i = 0; i + 1 < segments; ++i) {
      const long t = t0 + static_cast<long>(i) * cfg.exec_expert_steps();
      const CoeffMatrix a =
          fit_window(expert, cfg, 6, t, nullptr, /*apply_kkt=*/false);
      const CoeffMatrix b =
          fit_window(expert, cfg, 6, t + cfg.exec_expert_steps(), nullptr,
                     /*apply_kkt=*/false);
      const auto [pos_a, vel_a] = decode(a, rear, span);
      const auto [pos_b, vel_b] = decode(b, front, span);
      max_gap = std::max(
          max_gap, (vel_a.samples - vel_b.samples).cwiseAbs().maxCoeff());
    }
    CHECK(max_gap > 1e-4);  // orders of magnitude above the corrected chain
  }
}

TEST_CASE("full fit pipeline tracks the expert on the execution interval") {
  Rng rng(11);
  const Trajectory expert = smooth_expert(500, 2, 50.0, rng);
  const FitWindowConfig cfg = default_window();
  const long t = 40;
  const CoeffMatrix fit = fit_window(expert, cfg, 6, t);

  const double span = cfg.span_seconds(cfg.stride);
  const int n = cfg.exec_steps + 1;
  const VectorXd grid = VectorXd::LinSpaced(n, cfg.s_front(), cfg.s_rear());
  const auto [pos, vel] = decode(fit, grid, span);
  for (int i = 0; i < n; ++i) {
    const long step = t + 1 + cfg.stride * i;
    CHECK((pos.samples.row(i) - expert.samples.row(step))
              .cwiseAbs()
              .maxCoeff() < 2e-3);
  }
}
