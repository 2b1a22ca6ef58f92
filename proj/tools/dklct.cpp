// dklct: command-line front end.
//
//   dklct toy1d        step-function benchmark, standard GP vs deep kernel
//   dklct simulate     forward-project a phantom into a sinogram CSV
//   dklct reconstruct  fbp | gp | dkl reconstruction of a sinogram
//
// Exit status: 0 success, 2 bad arguments, 3 runtime failure.

#include "dklct/ct.hpp"
#include "dklct/toy1d.hpp"
#include "dklct/train.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace dklct;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainFlags {
    std::string cost = "nlml";
    std::string widths;
    std::size_t n_t = 0;
    std::size_t m_tilde = 48;
    std::size_t gp_m_tilde = 48;
    double alpha = kDefaultCoverageAlpha;
    std::size_t max_nodes = 401;
    std::size_t gp_iters = 100;
    std::size_t pretrain_iters = 500;
    std::size_t joint_iters = 300;
    std::size_t memory = 10;
    bool no_pretrain = false;
    std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--cost", f.cost, "Training objective")->check(CLI::IsMember({"nlml", "loo"}));
    cmd->add_option("--widths", f.widths, "Network layer widths, comma separated");
    cmd->add_option("--n-t", f.n_t, "Pre-training points (grid over the domain)");
    cmd->add_option("--m-tilde", f.m_tilde, "Basis functions per latent dimension (deep kernel)");
    cmd->add_option("--gp-m-tilde", f.gp_m_tilde, "Basis functions per input dimension (standard GP)");
    cmd->add_option("--alpha", f.alpha, "Spectral coverage factor for the domain size");
    cmd->add_option("--max-nodes", f.max_nodes, "Upper bound on Simpson nodes per line");
    cmd->add_option("--gp-iters", f.gp_iters, "L-BFGS iterations per standard-GP start");
    cmd->add_option("--pretrain-iters", f.pretrain_iters, "L-BFGS iterations for pre-training");
    cmd->add_option("--joint-iters", f.joint_iters, "L-BFGS iterations for joint training");
    cmd->add_option("--lbfgs-memory", f.memory, "L-BFGS memory length");
    cmd->add_flag("--no-pretrain", f.no_pretrain, "Start joint training from the random initialization");
    cmd->add_option("--seed", f.seed, "Seed for data noise and network initialization");
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != cell.size() || v == 0) throw UsageError("--widths: bad entry '" + cell + "'");
        out.push_back(v);
    }
    if (out.size() < 2) throw UsageError("--widths: need at least input and output widths");
    return out;
}

TrainConfig make_config(const TrainFlags& f, std::size_t input_dim) {
    TrainConfig c;
    c.cost = f.cost == "loo" ? CostKind::loo_cv : CostKind::nlml;
    c.widths = parse_widths(f.widths);
    if (c.widths.front() != input_dim) throw UsageError("--widths: first width must equal the input dimension");
    if (c.widths.back() != 1) throw UsageError("--widths: the latent output must be one-dimensional");
    c.pretrain_points = f.n_t;
    c.m_tilde = f.m_tilde;
    c.gp_m_tilde = f.gp_m_tilde;
    c.alpha = f.alpha;
    c.max_nodes = f.max_nodes;
    c.gp_fit.max_iterations = f.gp_iters;
    c.pretrain.max_iterations = f.pretrain_iters;
    c.joint.max_iterations = f.joint_iters;
    c.gp_fit.memory = c.pretrain.memory = c.joint.memory = f.memory;
    c.pretrain_enabled = !f.no_pretrain;
    c.seed = f.seed;
    if (c.max_nodes % 2 == 0) throw UsageError("--max-nodes must be odd");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return os;
}

void write_report(const fs::path& p, const TrainReport& r) {
    auto os = open_out(p);
    r.write_csv(os);
}

void log_report(const TrainReport& r) {
    if (r.records.empty()) {
        std::cerr << "[" << r.phase << "]\n";
        return;
    }
    std::cerr << "[" << r.phase << "] " << r.iterations() << " iterations, cost " << r.initial_cost() << " -> "
              << r.final_cost() << " (" << stop_reason_name(r.stop) << ", " << r.seconds << " s)\n";
}

double band_width(const Prediction& p) {
    double w = 0.0;
    for (double v : p.variance) w += 2.0 * 1.96 * std::sqrt(v);
    return p.variance.empty() ? 0.0 : w / static_cast<double>(p.variance.size());
}

void write_curve(const fs::path& p, const Matrix& xs, const StepFunction& step, const Prediction& pred) {
    auto os = open_out(p);
    os << "x,truth,mean,lower95,upper95\n";
    for (std::size_t i = 0; i < xs.rows(); ++i) {
        const double sd = std::sqrt(pred.variance[i]);
        os << num(xs(i, 0)) << ',' << num(step(xs(i, 0))) << ',' << num(pred.mean[i]) << ','
           << num(pred.mean[i] - 1.96 * sd) << ',' << num(pred.mean[i] + 1.96 * sd) << '\n';
    }
}

// ---------------------------------------------------------------------------

struct ToyFlags {
    std::string out_dir = "toy1d_out";
    std::size_t n_meas = 50;
    double noise = 0.001;
    bool no_noise = false;
    double step_location = 0.5;
    double step_low = 0.0;
    double step_high = 1.0;
    std::size_t n_eval = 1001;
    TrainFlags train{.widths = "1,5,4,1", .n_t = 100};
};

int cmd_toy1d(const ToyFlags& f) {
    const TrainConfig cfg = make_config(f.train, 1);
    if (f.n_meas == 0) throw UsageError("--n-meas must be positive");
    if (f.n_eval < 2) throw UsageError("--n-eval must be at least 2");
    if (f.noise < 0.0) throw UsageError("--noise must be >= 0");
    const StepFunction step{f.step_location, f.step_low, f.step_high};
    const double noise = f.no_noise ? 0.0 : f.noise;
    const auto lines = step_dataset(step, f.n_meas, noise, f.train.seed);

    fs::create_directories(f.out_dir);
    const fs::path dir(f.out_dir);
    {
        auto os = open_out(dir / "measurements.csv");
        os << "a,b,value\n";
        for (const auto& l : lines)
            os << num(l.center[0] - l.half_length) << ',' << num(l.center[0] + l.half_length) << ',' << num(l.value)
               << '\n';
    }

    const Box box{{0.0}, {1.0}};
    const Matrix xs = grid_points(box, f.n_eval);
    const auto res = run_pipeline(lines, xs, box, cfg);
    for (const auto& r : res.standard.reports) log_report(r);
    log_report(res.pretrain.report);
    log_report(res.joint.report);

    const LineGpProblem standard(lines, run_node_counts(lines, cfg), cfg.gp_m_tilde, cfg.alpha);
    const Warp identity = IdentityWarp{1};
    const auto std_pred = predict(standard.assemble(identity, res.standard.hyp), standard.y(), xs, identity);

    write_curve(dir / "standard_gp.csv", xs, step, std_pred);
    write_curve(dir / "dkl.csv", xs, step, res.prediction);
    write_report(dir / "train_report.csv", res.joint.report);
    save_warp(dir / "warp.txt", res.joint.net);
    save_hyperparameters(dir / "hyperparameters.txt", res.joint.hyp);
    save_hyperparameters(dir / "standard_hyperparameters.txt", res.standard.hyp);

    const auto rmse = [&](const Prediction& p) {
        double ss = 0.0;
        for (std::size_t i = 0; i < xs.rows(); ++i) ss += std::pow(p.mean[i] - step(xs(i, 0)), 2);
        return std::sqrt(ss / static_cast<double>(xs.rows()));
    };
    auto os = open_out(dir / "summary.txt");
    os << "rmse_standard = " << num(rmse(std_pred)) << '\n'
       << "rmse_dkl = " << num(rmse(res.prediction)) << '\n'
       << "band95_standard = " << num(band_width(std_pred)) << '\n'
       << "band95_dkl = " << num(band_width(res.prediction)) << '\n';
    std::cout << "rmse standard " << rmse(std_pred) << "  dkl " << rmse(res.prediction) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
    std::string out;
    std::string lines_out;
    std::string phantom = "shepp-logan";
    std::string image;
    double disc_radius = 0.5;
    std::size_t angles = 9;
    double angle_first = 0.0;
    double angle_last = 160.0;
    std::size_t detectors = 185;
    double object_radius = 1.0;
    double noise = 0.001;
    std::uint64_t seed = 0;
    std::string projector = "analytic";
    std::size_t raster = 512;
    std::size_t nodes = 301;
};

int cmd_simulate(const SimulateFlags& f) {
    if (f.angles == 0 || f.detectors == 0) throw UsageError("--angles and --detectors must be positive");
    if (f.noise < 0.0) throw UsageError("--noise must be >= 0");
    if (f.nodes < 3 || f.nodes % 2 == 0) throw UsageError("--nodes must be odd and at least 3");
    if (!(f.disc_radius > 0.0) || !(f.object_radius > 0.0)) throw UsageError("radii must be positive");
    const auto geo = ProjectionGeometry::evenly_spaced(f.angles, f.angle_first, f.angle_last, f.detectors,
                                                       f.object_radius);
    const NoiseSpec noise{f.noise, f.seed};

    Sinogram sino;
    if (!f.image.empty()) {
        sino = forward_project(load_image_csv(f.image), geo, f.nodes, noise);
    } else {
        const auto ell = f.phantom == "disc" ? disc_phantom(f.disc_radius) : shepp_logan_ellipses();
        if (f.projector == "analytic") sino = forward_project(ell, geo, noise);
        else sino = forward_project(rasterize(ell, f.raster, f.raster), geo, f.nodes, noise);
    }
    save_sinogram(f.out, sino);

    if (!f.lines_out.empty()) {
        auto os = open_out(f.lines_out);
        os << "projection,detector,x0,y0,nx,ny,r,value\n";
        for (const auto& l : make_lines(geo))
            os << l.projection << ',' << l.detector << ',' << num(l.line.center[0]) << ',' << num(l.line.center[1])
               << ',' << num(l.line.direction[0]) << ',' << num(l.line.direction[1]) << ','
               << num(l.line.half_length) << ',' << num(sino.values(l.projection, l.detector)) << '\n';
    }
    std::cout << "wrote " << geo.projections() << " projections x " << geo.n_detectors << " detectors to " << f.out
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ReconstructFlags {
    std::string sinogram;
    std::string method = "dkl";
    std::string out_dir = "reconstruction";
    std::size_t resolution = 64;
    std::string reference = "none";
    TrainFlags train{.widths = "2,30,20,6,1", .n_t = 10000, .gp_m_tilde = 24};
};

ImageGrid image_from(std::vector<double> values, std::size_t n) {
    ImageGrid img(n, n);
    img.values = std::move(values);
    return img;
}

int cmd_reconstruct(const ReconstructFlags& f) {
    if (f.resolution == 0) throw UsageError("--resolution must be positive");
    const TrainConfig cfg = make_config(f.train, 2);
    const Sinogram sino = load_sinogram(f.sinogram);

    fs::create_directories(f.out_dir);
    const fs::path dir(f.out_dir);
    const std::size_t n = f.resolution;
    ImageGrid mean;
    std::optional<ImageGrid> variance;

    if (f.method == "fbp") {
        mean = fbp_reconstruct(sino, n, n);
    } else {
        const auto lines = sinogram_lines(sino);
        const double rr = sino.geometry.object_radius;
        const Box box{{-rr, -rr}, {rr, rr}};
        const Matrix stars = ImageGrid(n, n).centers();
        Prediction pred;
        if (f.method == "gp") {
            const auto fit = fit_standard_gp(lines, box, cfg);
            for (const auto& r : fit.reports) log_report(r);
            const LineGpProblem problem(lines, run_node_counts(lines, cfg), cfg.gp_m_tilde, cfg.alpha);
            const Warp identity = IdentityWarp{2};
            pred = predict(problem.assemble(identity, fit.hyp), problem.y(), stars, identity);
            write_report(dir / "train_report.csv", fit.reports[fit.best_start]);
            save_hyperparameters(dir / "hyperparameters.txt", fit.hyp);
        } else {
            auto res = run_pipeline(lines, stars, box, cfg);
            for (const auto& r : res.standard.reports) log_report(r);
            log_report(res.pretrain.report);
            log_report(res.joint.report);
            pred = std::move(res.prediction);
            write_report(dir / "train_report.csv", res.joint.report);
            write_report(dir / "pretrain_report.csv", res.pretrain.report);
            save_hyperparameters(dir / "hyperparameters.txt", res.joint.hyp);
            save_warp(dir / "warp.txt", res.joint.net);
        }
        mean = image_from(std::move(pred.mean), n);
        variance = image_from(std::move(pred.variance), n);
    }

    save_image_pgm(dir / (f.method + ".pgm"), mean);
    save_image_csv(dir / (f.method + ".csv"), mean);
    if (variance) {
        save_image_pgm(dir / "variance.pgm", *variance);
        save_image_csv(dir / "variance.csv", *variance);
    }

    auto os = open_out(dir / "summary.txt");
    os << "method = " << f.method << "\nresolution = " << n << '\n';
    if (f.reference != "none") {
        const auto truth = f.reference == "disc" ? rasterize(disc_phantom(0.5), n, n) : shepp_logan(n, n);
        const double e = image_rmse(mean, truth);
        os << "rmse = " << num(e) << '\n';
        std::cout << f.method << " rmse " << e << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep kernel learning for line-integral measurements"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    ToyFlags toy;
    auto* t = app.add_subcommand("toy1d", "1-D step benchmark: standard GP vs deep kernel");
    t->add_option("--out-dir", toy.out_dir, "Output directory");
    t->add_option("--n-meas", toy.n_meas, "Number of interval integrals");
    t->add_option("--noise", toy.noise, "Measurement noise standard deviation");
    t->add_flag("--no-noise", toy.no_noise, "Noise-free measurements");
    t->add_option("--step-location", toy.step_location, "Location of the step");
    t->add_option("--step-low", toy.step_low, "Value left of the step");
    t->add_option("--step-high", toy.step_high, "Value right of the step");
    t->add_option("--n-eval", toy.n_eval, "Evaluation points on [0, 1]");
    add_train_flags(t, toy.train);

    SimulateFlags sim;
    auto* s = app.add_subcommand("simulate", "Forward-project a phantom into a sinogram");
    s->add_option("--out", sim.out, "Sinogram CSV to write")->required();
    s->add_option("--lines-out", sim.lines_out, "Optional CSV with one row per line measurement");
    s->add_option("--phantom", sim.phantom, "Built-in phantom")->check(CLI::IsMember({"shepp-logan", "disc"}));
    s->add_option("--image", sim.image, "Image CSV on [-1,1]^2 to project instead of a phantom");
    s->add_option("--disc-radius", sim.disc_radius, "Radius of the disc phantom");
    s->add_option("--angles", sim.angles, "Number of projection angles");
    s->add_option("--angle-first", sim.angle_first, "First angle in degrees");
    s->add_option("--angle-last", sim.angle_last, "Last angle in degrees");
    s->add_option("--detectors", sim.detectors, "Detectors per projection");
    s->add_option("--object-radius", sim.object_radius, "Radius of the scanned region");
    s->add_option("--noise", sim.noise, "Measurement noise standard deviation");
    s->add_option("--seed", sim.seed, "Noise seed");
    s->add_option("--projector", sim.projector, "Phantom projector")->check(CLI::IsMember({"analytic", "image"}));
    s->add_option("--raster", sim.raster, "Raster size for the image projector");
    s->add_option("--nodes", sim.nodes, "Simpson nodes per line for image projection");

    ReconstructFlags rec;
    auto* r = app.add_subcommand("reconstruct", "Reconstruct an image from a sinogram");
    r->add_option("--sinogram", rec.sinogram, "Sinogram CSV")->required();
    r->add_option("--method", rec.method, "Reconstruction method")->check(CLI::IsMember({"fbp", "gp", "dkl"}));
    r->add_option("--out-dir", rec.out_dir, "Output directory");
    r->add_option("--resolution", rec.resolution, "Output image size per axis");
    r->add_option("--reference", rec.reference, "Phantom to compute the RMSE against")
        ->check(CLI::IsMember({"none", "shepp-logan", "disc"}));
    add_train_flags(r, rec.train);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (t->parsed()) return cmd_toy1d(toy);
        if (s->parsed()) return cmd_simulate(sim);
        return cmd_reconstruct(rec);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
