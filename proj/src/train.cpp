#include "dklct/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace dklct {

namespace {

double stddev(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

template <class Fn>
auto tagged(const char* phase, Fn&& fn) {
    try {
        return fn();
    } catch (const TrainingError& e) {
        throw TrainingError(std::string(phase) + ": " + e.what());
    } catch (const std::exception& e) {
        throw TrainingError(std::string(phase) + ": " + e.what());
    }
}

Matrix rows_to_features(const Matrix& rows) { return rows.transposed(); }

} // namespace

Matrix grid_points(const Box& box, std::size_t count) {
    const std::size_t d = box.dims();
    if (d == 0 || box.hi.size() != d) throw std::invalid_argument("grid_points: malformed box");
    if (count == 0) throw std::invalid_argument("grid_points: count must be positive");
    std::size_t per = count;
    if (d > 1) per = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(count), 1.0 / static_cast<double>(d))));
    per = std::max<std::size_t>(per, 1);
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= per;

    const auto coord = [&](std::size_t k, std::size_t i) {
        if (per == 1) return 0.5 * (box.lo[k] + box.hi[k]);
        return box.lo[k] + (box.hi[k] - box.lo[k]) * static_cast<double>(i) / static_cast<double>(per - 1);
    };
    Matrix out(total, d);
    for (std::size_t p = 0; p < total; ++p) {
        std::size_t rest = p;
        for (std::size_t k = d; k-- > 0;) {
            out(p, k) = coord(k, rest % per);
            rest /= per;
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (pretrain_points == 0) throw std::invalid_argument("train config: pretrain_points must be positive");
    if (widths.size() < 2 || std::find(widths.begin(), widths.end(), 0u) != widths.end())
        throw std::invalid_argument("train config: network widths must be positive, at least input and output");
    if (m_tilde == 0 || gp_m_tilde == 0) throw std::invalid_argument("train config: basis sizes must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("train config: alpha must be positive");
    if (!(node_lengthscale > 0.0)) throw std::invalid_argument("train config: node lengthscale must be positive");
    if (max_nodes < 3 || floor_nodes < 3) throw std::invalid_argument("train config: node counts must be at least 3");
    if (start_log_lengthscales.empty() || start_log_sigma_f.empty())
        throw std::invalid_argument("train config: empty multi-start grid");
    if (!(start_noise_fraction > 0.0)) throw std::invalid_argument("train config: noise fraction must be positive");
    for (const LbfgsOptions* o : {&gp_fit, &pretrain, &joint})
        if (o->memory == 0) throw std::invalid_argument("train config: L-BFGS memory must be positive");
}

std::vector<std::size_t> run_node_counts(std::span<const LineMeasurement> lines, const TrainConfig& config) {
    return node_counts_for(lines, config.node_lengthscale, config.max_nodes, config.floor_nodes);
}

StandardGpFit fit_standard_gp(std::span<const LineMeasurement> lines, const Box& box, const TrainConfig& config) {
    config.validate();
    if (lines.empty()) throw std::invalid_argument("fit_standard_gp: no measurements");
    const std::size_t d = lines.front().center.size();
    if (box.dims() != d) throw std::invalid_argument("fit_standard_gp: box dimension differs from the data");

    const LineGpProblem problem({lines.begin(), lines.end()}, run_node_counts(lines, config), config.gp_m_tilde,
                                config.alpha);
    double sd = stddev(problem.y());
    if (sd == 0.0) sd = 1.0;
    const double sigma0 = config.start_noise_fraction * sd;

    StandardGpFit fit;
    fit.cost = std::numeric_limits<double>::infinity();
    const Warp identity = IdentityWarp{d};
    std::size_t start = 0;
    for (double ll : config.start_log_lengthscales) {
        for (double lsf : config.start_log_sigma_f) {
            KernelHyperparameters h0{lsf, std::vector<double>(d, ll), std::log(sigma0)};
            const Objective f = [&](std::span<const double> theta, std::span<double> grad) {
                KernelHyperparameters h = h0;
                Warp w = identity;
                unpack_parameters(theta, h, w);
                auto cg = problem.cost_and_gradient(config.cost, w, h);
                std::copy(cg.gradient.begin(), cg.gradient.end(), grad.begin());
                return cg.value;
            };
            const std::string phase = "standard_gp start " + std::to_string(start);
            try {
                auto res = minimize_lbfgs(f, pack_parameters(h0, identity), config.gp_fit, phase);
                const double c = res.report.final_cost();
                if (std::isfinite(c) && c < fit.cost) {
                    KernelHyperparameters h = h0;
                    Warp w = identity;
                    unpack_parameters(res.x, h, w);
                    fit.hyp = h;
                    fit.cost = c;
                    fit.best_start = start;
                }
                fit.reports.push_back(std::move(res.report));
            } catch (const std::exception&) {
                TrainReport failed;
                failed.phase = phase + " (diverged)";
                failed.stop = StopReason::stagnated;
                failed.stagnated = true;
                fit.reports.push_back(std::move(failed));
            }
            ++start;
        }
    }
    if (!std::isfinite(fit.cost)) throw TrainingError("fit_standard_gp: every start diverged");

    const auto sys = problem.assemble(identity, fit.hyp);
    fit.points = grid_points(box, config.pretrain_points);
    fit.mean = predict(sys, problem.y(), fit.points, identity).mean;
    return fit;
}

PretrainResult pretrain_network(WarpNetwork net, const Matrix& points, std::span<const double> targets,
                                const TrainConfig& config) {
    config.validate();
    if (points.rows() != targets.size()) throw std::invalid_argument("pretrain_network: target count mismatch");
    if (points.cols() != net.input_dim() || net.output_dim() != 1)
        throw std::invalid_argument("pretrain_network: network shape does not match the targets");
    for (double t : targets)
        if (!std::isfinite(t)) throw std::invalid_argument("pretrain_network: non-finite target");

    const std::size_t n = targets.size();
    double mu = 0.0;
    for (double t : targets) mu += t;
    mu /= static_cast<double>(n);
    double scale = stddev(targets);
    if (scale == 0.0) scale = 1.0;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (targets[i] - mu) / scale;

    const Matrix inputs = rows_to_features(points);
    const Objective f = [&](std::span<const double> theta, std::span<double> grad) {
        net.set_parameters(theta);
        const auto tape = net.forward_batch(inputs);
        const Matrix& u = tape.output();
        Matrix du(1, n);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = u(0, i) - z[i];
            loss += r * r;
            du(0, i) = 2.0 * r / static_cast<double>(n);
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        net.backward_batch(tape, std::move(du), grad);
        return loss / static_cast<double>(n);
    };

    auto res = minimize_lbfgs(f, net.parameters(), config.pretrain, "pretrain");
    net.set_parameters(res.x);
    auto& last = net.layers().back();
    for (double& w : last.weights) w *= scale;
    for (double& b : last.biases) b = b * scale + mu;

    PretrainResult out{std::move(net), res.report.final_cost() * scale * scale, std::move(res.report)};
    return out;
}

KernelHyperparameters latent_hyperparameters(const KernelHyperparameters& input_hyp, const WarpNetwork& net,
                                             const Matrix& points) {
    const auto tape = net.forward_batch(rows_to_features(points));
    const Matrix& u = tape.output();
    KernelHyperparameters h{input_hyp.log_sigma_f, {}, input_hyp.log_sigma};
    for (std::size_t k = 0; k < u.rows(); ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < u.cols(); ++i) {
            lo = std::min(lo, u(k, i));
            hi = std::max(hi, u(k, i));
        }
        const double spread = hi > lo ? hi - lo : 1.0;
        h.log_lengthscales.push_back(std::log(0.25 * spread));
    }
    return h;
}

JointResult joint_train(const LineGpProblem& problem, WarpNetwork net, KernelHyperparameters hyp,
                        const TrainConfig& config) {
    config.validate();
    if (hyp.dims() != net.output_dim()) throw std::invalid_argument("joint_train: lengthscales do not match the warp");
    const KernelHyperparameters h0 = hyp;
    const Warp w0 = net;
    const Objective f = [&](std::span<const double> theta, std::span<double> grad) {
        KernelHyperparameters h = h0;
        Warp w = w0;
        unpack_parameters(theta, h, w);
        auto cg = problem.cost_and_gradient(config.cost, w, h);
        std::copy(cg.gradient.begin(), cg.gradient.end(), grad.begin());
        return cg.value;
    };
    auto res = minimize_lbfgs(f, pack_parameters(hyp, w0), config.joint, "joint");
    Warp w = w0;
    unpack_parameters(res.x, hyp, w);
    return {std::move(hyp), std::get<WarpNetwork>(std::move(w)), std::move(res.report)};
}

PipelineResult run_pipeline(std::span<const LineMeasurement> lines, const Matrix& stars, const Box& box,
                            const TrainConfig& config) {
    config.validate();
    auto standard = tagged("standard_gp", [&] { return fit_standard_gp(lines, box, config); });
    return run_pipeline(lines, stars, std::move(standard), config);
}

PipelineResult run_pipeline(std::span<const LineMeasurement> lines, const Matrix& stars, StandardGpFit standard,
                            const TrainConfig& config) {
    config.validate();
    PipelineResult out;
    out.standard = std::move(standard);

    WarpNetwork net = init_params(config.widths, config.seed);
    if (config.pretrain_enabled) {
        out.pretrain = tagged("pretrain", [&] { return pretrain_network(net, out.standard.points, out.standard.mean, config); });
    } else {
        out.pretrain.net = net;
        out.pretrain.mse = std::numeric_limits<double>::quiet_NaN();
        out.pretrain.report.phase = "pretrain (skipped)";
    }

    const LineGpProblem problem({lines.begin(), lines.end()}, run_node_counts(lines, config), config.m_tilde,
                                config.alpha);
    out.joint = tagged("joint", [&] {
        const auto hyp = latent_hyperparameters(out.standard.hyp, out.pretrain.net, out.standard.points);
        return joint_train(problem, out.pretrain.net, hyp, config);
    });
    tagged("predict", [&] {
        const Warp w = out.joint.net;
        out.system = problem.assemble(w, out.joint.hyp);
        out.prediction = predict(out.system, problem.y(), stars, w);
        return 0;
    });
    return out;
}

void save_hyperparameters(const std::filesystem::path& path, const KernelHyperparameters& hyp) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "# dklct kernel hyperparameters v1\n";
    os << "log_sigma_f = " << num(hyp.log_sigma_f) << '\n';
    os << "log_lengthscales =";
    for (double l : hyp.log_lengthscales) os << ' ' << num(l);
    os << '\n';
    os << "log_sigma = " << num(hyp.log_sigma) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

KernelHyperparameters load_hyperparameters(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    KernelHyperparameters hyp;
    bool seen[3] = {false, false, false};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        const auto where = path.string() + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw std::runtime_error(where + ": expected key = value");
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        std::istringstream vs(line.substr(eq + 1));
        std::vector<double> values;
        double v;
        while (vs >> v) values.push_back(v);
        if (!vs.eof() || values.empty()) throw std::runtime_error(where + ": malformed value");
        if (key == "log_sigma_f" && values.size() == 1) {
            hyp.log_sigma_f = values[0];
            seen[0] = true;
        } else if (key == "log_lengthscales") {
            hyp.log_lengthscales = values;
            seen[1] = true;
        } else if (key == "log_sigma" && values.size() == 1) {
            hyp.log_sigma = values[0];
            seen[2] = true;
        } else {
            throw std::runtime_error(where + ": unknown key '" + key + "'");
        }
    }
    if (!seen[0] || !seen[1] || !seen[2]) throw std::runtime_error(path.string() + ": missing hyperparameter");
    return hyp;
}

} // namespace dklct
