#include "dklct/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <ostream>

namespace dklct {

namespace {

double max_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

std::vector<double> steepest(std::span<const double> g) {
    double n2 = dot(g, g);
    const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] * inv;
    return d;
}

std::vector<double> two_loop(const std::deque<Pair>& mem, std::span<const double> g) {
    std::vector<double> q(g.begin(), g.end());
    std::vector<double> a(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
        a[k] = mem[k].rho * dot(mem[k].s, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= a[k] * mem[k].y[i];
    }
    const Pair& last = mem.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
    for (std::size_t k = 0; k < mem.size(); ++k) {
        const double b = mem[k].rho * dot(mem[k].y, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += (a[k] - b) * mem[k].s[i];
    }
    for (double& v : q) v = -v;
    return q;
}

} // namespace

const char* stop_reason_name(StopReason reason) {
    switch (reason) {
    case StopReason::gradient: return "gradient";
    case StopReason::cost_change: return "cost_change";
    case StopReason::iteration_budget: return "iteration_budget";
    case StopReason::stagnated: return "stagnated";
    }
    return "unknown";
}

void TrainReport::write_csv(std::ostream& os) const {
    const auto old = os.precision(17);
    os << "iteration,cost,grad_norm,lr,halvings,event\n";
    for (const auto& r : records) {
        os << r.iteration << ',' << r.cost << ',' << r.gradient_norm << ',' << r.rate << ',' << r.halvings << ',';
        if (r.reset) os << "reset";
        else if (r.grew) os << "grow";
        else if (r.halvings > 0) os << "halve";
        os << '\n';
    }
    os.precision(old);
}

LbfgsResult minimize_lbfgs(const Objective& f, std::vector<double> x, const LbfgsOptions& options,
                           std::string phase) {
    if (options.memory == 0 || options.initial_rate <= 0.0 || options.max_rate <= 0.0)
        throw std::invalid_argument("minimize_lbfgs: invalid options");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = x.size();

    LbfgsResult out;
    TrainReport& rep = out.report;
    rep.phase = std::move(phase);

    std::vector<double> g(n);
    double cost = f(x, g);
    if (!std::isfinite(cost)) throw TrainingError(rep.phase + ": non-finite cost at the starting point");
    rep.records.push_back({0, cost, max_norm(g), options.initial_rate, 0, false, false});

    std::deque<Pair> mem;
    double rate = options.initial_rate;
    std::size_t streak = 0;
    std::vector<double> xt(n), gt(n);

    if (max_norm(g) < options.gradient_tolerance) {
        rep.stop = StopReason::gradient;
    } else {
        rep.stop = StopReason::iteration_budget;
        bool reset = false;
        for (std::size_t it = 1; it <= options.max_iterations; ++it) {
            std::vector<double> d = mem.empty() ? steepest(g) : two_loop(mem, g);
            if (!(dot(d, g) < 0.0)) {
                mem.clear();
                d = steepest(g);
            }

            std::size_t halvings = 0;
            double ct = 0.0;
            bool accepted = false;
            for (;;) {
                for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + rate * d[i];
                bool ok = true;
                try {
                    ct = f(xt, gt);
                } catch (const std::exception&) {
                    ok = false;
                }
                if (ok && std::isfinite(ct) && ct <= cost) {
                    accepted = true;
                    break;
                }
                if (halvings == options.max_halvings) break;
                rate *= 0.5;
                ++halvings;
            }

            if (!accepted) {
                // the halvings are spent; give the search one more chance from steepest descent
                rate = options.initial_rate;
                streak = 0;
                if (!mem.empty() && !reset) {
                    mem.clear();
                    reset = true;
                    --it;
                    continue;
                }
                rep.stop = StopReason::stagnated;
                rep.stagnated = true;
                break;
            }

            Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
            for (std::size_t i = 0; i < n; ++i) {
                p.s[i] = xt[i] - x[i];
                p.y[i] = gt[i] - g[i];
            }
            const double sy = dot(p.s, p.y);
            if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
                p.rho = 1.0 / sy;
                mem.push_back(std::move(p));
                if (mem.size() > options.memory) mem.pop_front();
            }

            bool grew = false;
            if (halvings == 0) {
                if (++streak >= options.growth_streak) {
                    rate = std::min(rate * options.growth, options.max_rate);
                    streak = 0;
                    grew = true;
                }
            } else {
                streak = 0;
            }

            const double previous = cost;
            x.swap(xt);
            g.swap(gt);
            cost = ct;
            rep.records.push_back({it, cost, max_norm(g), rate, halvings, grew, reset});
            reset = false;

            if (max_norm(g) < options.gradient_tolerance) {
                rep.stop = StopReason::gradient;
                break;
            }
            if (std::abs(previous - cost) <= options.relative_tolerance * std::max(std::abs(previous), 1e-300)) {
                rep.stop = StopReason::cost_change;
                break;
            }
        }
    }

    rep.final_parameters = x;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.x = std::move(x);
    return out;
}

} // namespace dklct
