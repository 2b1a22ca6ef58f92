#include "doctest.h"

#include "dklct/toy1d.hpp"
#include "dklct/train.hpp"
#include "gp_fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

using namespace dklct;

namespace {

Objective quadratic(std::vector<double> centre, std::vector<double> scales) {
    return [=](std::span<const double> x, std::span<double> g) {
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - centre[i];
            f += 0.5 * scales[i] * d * d;
            g[i] = scales[i] * d;
        }
        return f;
    };
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

void check_monotone(const TrainReport& r) {
    for (std::size_t i = 1; i < r.records.size(); ++i) CHECK(r.records[i].cost <= r.records[i - 1].cost);
}

TrainConfig quick_config() {
    TrainConfig c;
    c.gp_m_tilde = 32;
    c.m_tilde = 32;
    c.joint.max_iterations = 150;
    c.pretrain.max_iterations = 300;
    return c;
}

double max_abs_of(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST_CASE("L-BFGS minimizes a scaled quadratic") {
    const auto f = quadratic({1.0, -2.0, 0.5}, {1.0, 10.0, 100.0});
    const auto res = minimize_lbfgs(f, {0.0, 0.0, 0.0}, LbfgsOptions{});
    CHECK(res.report.stop == StopReason::gradient);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.x[1] == doctest::Approx(-2.0).epsilon(1e-6));
    CHECK(res.x[2] == doctest::Approx(0.5).epsilon(1e-6));
    check_monotone(res.report);
    CHECK(res.report.final_parameters == res.x);
}

TEST_CASE("L-BFGS solves Rosenbrock") {
    LbfgsOptions opt;
    opt.max_iterations = 2000;
    const auto res = minimize_lbfgs(rosenbrock, {-1.2, 1.0}, opt);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-4));
    check_monotone(res.report);
    bool halved = false;
    for (const auto& r : res.report.records) halved = halved || r.halvings > 0;
    CHECK(halved);
}

TEST_CASE("L-BFGS returns immediately at a stationary point") {
    const auto res = minimize_lbfgs(quadratic({1.0}, {2.0}), {1.0}, LbfgsOptions{});
    CHECK(res.report.iterations() == 0);
    CHECK(res.report.stop == StopReason::gradient);
    CHECK(res.x == std::vector<double>{1.0});
}

TEST_CASE("L-BFGS reports stagnation when no step decreases the cost") {
    // gradient points the wrong way, so every trial step increases f
    const Objective f = [](std::span<const double> x, std::span<double> g) {
        g[0] = -1.0;
        return x[0];
    };
    const auto res = minimize_lbfgs(f, {0.0}, LbfgsOptions{});
    CHECK(res.report.stagnated);
    CHECK(res.report.stop == StopReason::stagnated);
    CHECK(res.x == std::vector<double>{0.0});
    CHECK(res.report.final_cost() == 0.0);
}

TEST_CASE("L-BFGS treats exceptions in trial steps as rejections") {
    const Objective f = [](std::span<const double> x, std::span<double> g) {
        if (x[0] < -0.5) throw std::domain_error("outside");
        g[0] = 2.0 * (x[0] + 0.4);
        return (x[0] + 0.4) * (x[0] + 0.4);
    };
    LbfgsOptions opt;
    opt.initial_rate = opt.max_rate = 1.0;
    const auto res = minimize_lbfgs(f, {3.0}, opt);
    CHECK(res.x[0] == doctest::Approx(-0.4).epsilon(1e-6));
    check_monotone(res.report);
}

TEST_CASE("learning rate grows after a streak of full steps and stays capped") {
    LbfgsOptions opt;
    opt.initial_rate = 0.01;
    opt.max_rate = 0.02;
    opt.max_iterations = 30;
    opt.gradient_tolerance = 0.0;
    opt.relative_tolerance = 0.0;
    const auto res = minimize_lbfgs(quadratic({100.0}, {1e-6}), {0.0}, opt);
    std::size_t grows = 0;
    for (const auto& r : res.report.records) {
        CHECK(r.rate <= 0.02);
        grows += r.grew ? 1 : 0;
    }
    CHECK(grows >= 2);
    CHECK(res.report.records[5].rate == doctest::Approx(0.015));
}

TEST_CASE("report CSV and determinism") {
    const auto a = minimize_lbfgs(rosenbrock, {-1.2, 1.0}, LbfgsOptions{});
    const auto b = minimize_lbfgs(rosenbrock, {-1.2, 1.0}, LbfgsOptions{});
    std::ostringstream sa, sb;
    a.report.write_csv(sa);
    b.report.write_csv(sb);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().rfind("iteration,cost,grad_norm,lr,halvings,event\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : sa.str()) lines += c == '\n';
    CHECK(lines == a.report.records.size() + 1);
}

TEST_CASE("grid_points") {
    const auto g1 = grid_points(Box{{0.0}, {1.0}}, 5);
    CHECK(g1.rows() == 5);
    CHECK(g1(0, 0) == 0.0);
    CHECK(g1(4, 0) == 1.0);
    CHECK(g1(2, 0) == 0.5);
    const auto g2 = grid_points(Box{{-1.0, -1.0}, {1.0, 1.0}}, 10000);
    CHECK(g2.rows() == 10000);
    CHECK(g2(0, 0) == -1.0);
    CHECK(g2(0, 1) == -1.0);
    CHECK(g2(1, 0) == -1.0);
    CHECK(g2(99, 1) == 1.0);
    CHECK(g2(9999, 0) == 1.0);
    CHECK_THROWS_AS(grid_points(Box{{0.0}, {1.0}}, 0), std::invalid_argument);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.pretrain_points = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.widths = {1, 0, 1};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.joint.memory = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("standard GP on pure noise collapses the signal") {
    const double sigma = 0.01;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    std::vector<LineMeasurement> lines;
    for (int i = 0; i < 40; ++i) lines.push_back({{unit(rng)}, {1.0}, 0.01, gauss(rng)});
    const auto fit = fit_standard_gp(lines, Box{{0.0}, {1.0}}, quick_config());
    CHECK(fit.hyp.sigma_f() < 0.1);
    CHECK(max_abs_of(fit.mean) < 3.0 * sigma);
    CHECK(fit.reports.size() == 6);
}

TEST_CASE("standard GP overshoots at a step") {
    const StepFunction step;
    const auto lines = step_dataset(step, 50, 0.001, 0);
    const auto fit = fit_standard_gp(lines, Box{{0.0}, {1.0}}, quick_config());
    double over = 0.0;
    for (std::size_t i = 0; i < fit.points.rows(); ++i)
        over = std::max({over, fit.mean[i] - step.high, step.low - fit.mean[i]});
    CHECK(over > 0.05 * (step.high - step.low));
    for (const auto& r : fit.reports) check_monotone(r);
}

TEST_CASE("standard GP mean is the posterior of the selected hyperparameters") {
    const auto lines = step_dataset(StepFunction{}, 30, 0.001, 3);
    const auto cfg = quick_config();
    const auto fit = fit_standard_gp(lines, Box{{0.0}, {1.0}}, cfg);
    const LineGpProblem problem(lines, run_node_counts(lines, cfg), cfg.gp_m_tilde, cfg.alpha);
    const Warp id = IdentityWarp{1};
    const auto pred = predict(problem.assemble(id, fit.hyp), problem.y(), fit.points, id);
    CHECK(pred.mean == fit.mean);
    CHECK(problem.cost(cfg.cost, id, fit.hyp) == doctest::Approx(fit.cost).epsilon(1e-12));
}

TEST_CASE("duplicated data: cost identity and fitted optimum") {
    const auto lines = step_dataset(StepFunction{}, 30, 0.001, 9);
    auto doubled = lines;
    doubled.insert(doubled.end(), lines.begin(), lines.end());
    const double n = static_cast<double>(lines.size());
    const LineGpProblem once(lines, std::vector<std::size_t>(lines.size(), 61), 32);
    const LineGpProblem twice(doubled, std::vector<std::size_t>(doubled.size(), 61), 32);
    const Warp id = IdentityWarp{1};

    // (y, y) splits into the mean y with noise σ/√2 and a zero difference with noise σ/√2
    for (double sigma : {0.3, 0.01, 0.002}) {
        const auto h = KernelHyperparameters::from_values(0.6, {0.1}, sigma);
        const auto half = KernelHyperparameters::from_values(0.6, {0.1}, sigma / std::sqrt(2.0));
        const double expect = once.cost(CostKind::nlml, id, half) +
                              0.5 * n * std::log(std::numbers::pi * sigma * sigma) + n * std::log(2.0);
        CHECK(twice.cost(CostKind::nlml, id, h) == doctest::Approx(expect).epsilon(1e-10));
    }

    // the zero difference rewards small σ, so the optimum moves toward lower noise
    auto cfg = quick_config();
    cfg.gp_fit.max_iterations = 400;
    const auto a = fit_standard_gp(lines, Box{{0.0}, {1.0}}, cfg);
    const auto b = fit_standard_gp(doubled, Box{{0.0}, {1.0}}, cfg);
    CHECK(b.hyp.log_sigma < a.hyp.log_sigma);
}

TEST_CASE("fit_standard_gp rejects empty or mismatched input") {
    CHECK_THROWS_AS(fit_standard_gp({}, Box{{0.0}, {1.0}}, TrainConfig{}), std::invalid_argument);
    const auto lines = step_dataset(StepFunction{}, 5, 0.001, 1);
    CHECK_THROWS_AS(fit_standard_gp(lines, Box{{0.0, 0.0}, {1.0, 1.0}}, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("pre-training") {
    const auto cfg = quick_config();
    const Matrix pts = grid_points(Box{{0.0}, {1.0}}, 100);

    SUBCASE("zero target with a zero network is already optimal") {
        const std::vector<double> zero(100, 0.0);
        const auto res = pretrain_network(WarpNetwork({1, 5, 4, 1}), pts, zero, cfg);
        CHECK(res.mse == 0.0);
        CHECK(res.report.iterations() == 0);
    }
    SUBCASE("fits a step") {
        std::vector<double> t(100);
        for (std::size_t i = 0; i < 100; ++i) t[i] = StepFunction{}(pts(i, 0));
        auto c = cfg;
        c.pretrain.max_iterations = 500;
        const auto res = pretrain_network(init_params({1, 5, 4, 1}, 0), pts, t, c);
        CHECK(res.mse < 1e-2);
        check_monotone(res.report);
        // reported MSE is in target units
        double mse = 0.0;
        for (std::size_t i = 0; i < 100; ++i) {
            const double x[] = {pts(i, 0)};
            mse += std::pow(res.net.forward(x)[0] - t[i], 2);
        }
        CHECK(mse / 100.0 == doctest::Approx(res.mse).epsilon(1e-9));
    }
    SUBCASE("doubling the target doubles the fit") {
        std::vector<double> t(100), t2(100);
        for (std::size_t i = 0; i < 100; ++i) {
            t[i] = std::sin(6.0 * pts(i, 0)) + StepFunction{}(pts(i, 0));
            t2[i] = 2.0 * t[i];
        }
        const auto a = pretrain_network(init_params({1, 5, 4, 1}, 2), pts, t, cfg);
        const auto b = pretrain_network(init_params({1, 5, 4, 1}, 2), pts, t2, cfg);
        for (std::size_t i = 0; i < 100; ++i) {
            const double x[] = {pts(i, 0)};
            const double ua = a.net.forward(x)[0], ub = b.net.forward(x)[0];
            CHECK(std::abs(ub - 2.0 * ua) <= 0.1 * std::abs(2.0 * ua) + 1e-9);
        }
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(pretrain_network(WarpNetwork({2, 3, 1}), pts, std::vector<double>(100), cfg),
                        std::invalid_argument);
        CHECK_THROWS_AS(pretrain_network(WarpNetwork({1, 3, 1}), pts, std::vector<double>(99), cfg),
                        std::invalid_argument);
    }
}

TEST_CASE("latent hyperparameters follow the spread of the warp") {
    WarpNetwork net({1, 1});
    net.layers()[0].weights = {8.0};
    const auto h = latent_hyperparameters(KernelHyperparameters::from_values(0.7, {0.1}, 0.02), net,
                                          grid_points(Box{{0.0}, {1.0}}, 11));
    CHECK(h.lengthscale(0) == doctest::Approx(2.0));
    CHECK(h.sigma_f() == doctest::Approx(0.7));
    CHECK(h.sigma() == doctest::Approx(0.02));
}

TEST_CASE("joint training") {
    const auto lines = step_dataset(StepFunction{}, 50, 0.001, 0);
    const Box box{{0.0}, {1.0}};
    const auto cfg = quick_config();
    const auto fit = fit_standard_gp(lines, box, cfg);
    const auto pre = pretrain_network(init_params(cfg.widths, 0), fit.points, fit.mean, cfg);
    const LineGpProblem problem(lines, run_node_counts(lines, cfg), cfg.m_tilde, cfg.alpha);
    const auto hyp0 = latent_hyperparameters(fit.hyp, pre.net, fit.points);

    SUBCASE("lowers the cost below the standard GP and never rises") {
        const auto res = joint_train(problem, pre.net, hyp0, cfg);
        check_monotone(res.report);
        CHECK(res.report.final_cost() <= res.report.initial_cost());
        CHECK(res.report.final_cost() < fit.cost);
        const Warp w = res.net;
        CHECK(problem.cost(cfg.cost, w, res.hyp) == doctest::Approx(res.report.final_cost()).epsilon(1e-12));
    }
    SUBCASE("stops at once when the gradient is below tolerance") {
        auto c = cfg;
        c.joint.gradient_tolerance = 1e300;
        const auto res = joint_train(problem, pre.net, hyp0, c);
        CHECK(res.report.iterations() == 0);
        CHECK(res.net.parameters() == pre.net.parameters());
    }
    SUBCASE("rejects mismatched lengthscales") {
        auto two = hyp0;
        two.log_lengthscales.push_back(0.0);
        CHECK_THROWS_AS(joint_train(problem, pre.net, two, cfg), std::invalid_argument);
    }
}

TEST_CASE("pipeline on the step benchmark") {
    const StepFunction step;
    const auto lines = step_dataset(step, 50, 0.001, 1);
    const Box box{{0.0}, {1.0}};
    auto cfg = quick_config();
    cfg.seed = 1;
    const Matrix xs = grid_points(box, 501);
    const auto a = run_pipeline(lines, xs, box, cfg);
    const auto b = run_pipeline(lines, xs, box, cfg);

    std::ostringstream sa, sb;
    a.joint.report.write_csv(sa);
    b.joint.report.write_csv(sb);
    CHECK(sa.str() == sb.str());
    CHECK(a.prediction.mean == b.prediction.mean);

    const LineGpProblem sp(lines, run_node_counts(lines, cfg), cfg.gp_m_tilde, cfg.alpha);
    const Warp id = IdentityWarp{1};
    const auto std_pred = predict(sp.assemble(id, a.standard.hyp), sp.y(), xs, id);
    double e_std = 0.0, e_dkl = 0.0;
    for (std::size_t i = 0; i < xs.rows(); ++i) {
        e_std += std::pow(std_pred.mean[i] - step(xs(i, 0)), 2);
        e_dkl += std::pow(a.prediction.mean[i] - step(xs(i, 0)), 2);
    }
    CHECK(e_dkl < e_std);

    const auto empty = run_pipeline(lines, Matrix(0, 1), a.standard, cfg);
    CHECK(empty.prediction.mean.empty());
    CHECK(empty.prediction.variance.empty());
    CHECK(empty.joint.report.iterations() > 0);
}

TEST_CASE("pipeline failures carry the phase") {
    const auto lines = step_dataset(StepFunction{}, 10, 0.001, 1);
    auto cfg = quick_config();
    cfg.widths = {2, 3, 1};
    try {
        run_pipeline(lines, Matrix(0, 1), Box{{0.0}, {1.0}}, cfg);
        FAIL("expected a TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).rfind("pretrain:", 0) == 0);
    }
}

TEST_CASE("hyperparameter files round-trip exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "dklct_train_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "hyp.txt";
    KernelHyperparameters h{std::log(0.3), {std::log(0.123456789), -1.0 / 3.0}, std::log(1e-3)};
    save_hyperparameters(path, h);
    const auto back = load_hyperparameters(path);
    CHECK(back.log_sigma_f == h.log_sigma_f);
    CHECK(back.log_lengthscales == h.log_lengthscales);
    CHECK(back.log_sigma == h.log_sigma);

    std::ofstream(dir / "bad.txt") << "log_sigma_f = 1\nlog_lengthscales = x\nlog_sigma = 0\n";
    CHECK_THROWS_WITH_AS(load_hyperparameters(dir / "bad.txt"), doctest::Contains("bad.txt:2"), std::runtime_error);
    std::ofstream(dir / "missing.txt") << "log_sigma_f = 1\n";
    CHECK_THROWS_AS(load_hyperparameters(dir / "missing.txt"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
