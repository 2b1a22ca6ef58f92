#include "dklct/warp.hpp"

#include "dklct/simd.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>

namespace dklct {

WarpNetwork::WarpNetwork(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw std::invalid_argument("WarpNetwork: need at least input and output widths");
    for (std::size_t w : widths_)
        if (w == 0) throw std::invalid_argument("WarpNetwork: widths must be positive");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        DenseLayer layer;
        layer.in = widths_[l];
        layer.out = widths_[l + 1];
        layer.weights.assign(layer.in * layer.out, 0.0);
        layer.biases.assign(layer.out, 0.0);
        param_count_ += layer.weights.size() + layer.biases.size();
        layers_.push_back(std::move(layer));
    }
}

std::vector<double> WarpNetwork::parameters() const {
    std::vector<double> flat;
    flat.reserve(param_count_);
    for (const auto& layer : layers_) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

void WarpNetwork::set_parameters(std::span<const double> flat) {
    if (flat.size() != param_count_) throw DimensionError("WarpNetwork::set_parameters: wrong parameter count");
    auto it = flat.begin();
    for (auto& layer : layers_) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(layer.weights.size()), layer.weights.begin());
        it += static_cast<std::ptrdiff_t>(layer.weights.size());
        std::copy(it, it + static_cast<std::ptrdiff_t>(layer.biases.size()), layer.biases.begin());
        it += static_cast<std::ptrdiff_t>(layer.biases.size());
    }
}

std::vector<double> WarpNetwork::forward(std::span<const double> x) const {
    if (x.size() != input_dim()) throw DimensionError("WarpNetwork::forward: input dimension mismatch");
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        std::vector<double> z(layer.biases);
        for (std::size_t o = 0; o < layer.out; ++o)
            z[o] += simd::dot(std::span<const double>(layer.weights).subspan(o * layer.in, layer.in), a);
        if (l + 1 < layers_.size())
            for (double& v : z) v = std::tanh(v);
        a = std::move(z);
    }
    return a;
}

WarpGradient WarpNetwork::gradient(std::span<const double> x, std::span<const double> cotangent) const {
    if (x.size() != input_dim() || cotangent.size() != output_dim())
        throw DimensionError("WarpNetwork::gradient: dimension mismatch");
    Matrix in(input_dim(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) in(i, 0) = x[i];
    const Tape tape = forward_batch(std::move(in));
    Matrix du(output_dim(), 1);
    for (std::size_t i = 0; i < cotangent.size(); ++i) du(i, 0) = cotangent[i];
    WarpGradient g;
    g.params.assign(param_count_, 0.0);
    Matrix dx;
    backward_batch(tape, std::move(du), g.params, &dx);
    g.input.assign(dx.data().begin(), dx.data().end());
    return g;
}

WarpNetwork::Tape WarpNetwork::forward_batch(Matrix inputs) const {
    if (inputs.rows() != input_dim()) throw DimensionError("WarpNetwork::forward_batch: input dimension mismatch");
    const std::size_t batch = inputs.cols();
    Tape tape;
    tape.activations.reserve(layers_.size() + 1);
    tape.activations.push_back(std::move(inputs));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const Matrix& a = tape.activations.back();
        Matrix z(layer.out, batch);
        for (std::size_t o = 0; o < layer.out; ++o) {
            auto zr = z.row(o);
            std::fill(zr.begin(), zr.end(), layer.biases[o]);
            for (std::size_t i = 0; i < layer.in; ++i) simd::axpy(layer.w(o, i), a.row(i), zr);
        }
        if (l + 1 < layers_.size()) simd::tanh_inplace(z.data());
        tape.activations.push_back(std::move(z));
    }
    return tape;
}

void WarpNetwork::backward_batch(const Tape& tape, Matrix du, std::span<double> dparams, Matrix* dinputs) const {
    if (dparams.size() != param_count_) throw DimensionError("WarpNetwork::backward_batch: wrong gradient size");
    if (du.rows() != output_dim() || du.cols() != tape.output().cols())
        throw DimensionError("WarpNetwork::backward_batch: cotangent shape mismatch");

    std::vector<std::size_t> offset(layers_.size());
    for (std::size_t l = 0, off = 0; l < layers_.size(); ++l) {
        offset[l] = off;
        off += layers_[l].weights.size() + layers_[l].biases.size();
    }

    Matrix g = std::move(du);
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        if (l + 1 < layers_.size()) simd::tanh_backward(tape.activations[l + 1].data(), g.data());
        const Matrix& a = tape.activations[l];
        double* dw = dparams.data() + offset[l];
        double* db = dw + layer.weights.size();
        for (std::size_t o = 0; o < layer.out; ++o) {
            const auto gr = std::as_const(g).row(o);
            for (std::size_t i = 0; i < layer.in; ++i) dw[o * layer.in + i] += simd::dot(gr, a.row(i));
            db[o] += simd::sum(gr);
        }
        if (l == 0 && dinputs == nullptr) break;
        Matrix prev(layer.in, g.cols());
        for (std::size_t o = 0; o < layer.out; ++o)
            for (std::size_t i = 0; i < layer.in; ++i) simd::axpy(layer.w(o, i), std::as_const(g).row(o), prev.row(i));
        g = std::move(prev);
    }
    if (dinputs != nullptr) *dinputs = std::move(g);
}

std::size_t warp_input_dim(const Warp& w) {
    return std::visit([](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, IdentityWarp>) return v.dim;
        else return v.input_dim();
    }, w);
}

std::size_t warp_output_dim(const Warp& w) {
    return std::visit([](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, IdentityWarp>) return v.dim;
        else return v.output_dim();
    }, w);
}

std::size_t warp_param_count(const Warp& w) {
    if (const auto* net = std::get_if<WarpNetwork>(&w)) return net->param_count();
    return 0;
}

WarpNetwork init_params(std::vector<std::size_t> widths, std::uint64_t seed) {
    WarpNetwork net(std::move(widths));
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers()) {
        const double a = 1.0 / std::sqrt(static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-a, a);
        for (double& w : layer.weights) w = dist(rng);
    }
    return net;
}

void write_warp(std::ostream& os, const WarpNetwork& net) {
    os << "# dklct warp network v1\nwidths";
    for (std::size_t w : net.widths()) os << ' ' << w;
    os << '\n';
    char buf[40];
    for (double v : net.parameters()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        os << buf;
    }
}

WarpNetwork read_warp(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::size_t> widths;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key != "widths") throw std::runtime_error("warp file line " + std::to_string(lineno) + ": expected 'widths'");
        std::size_t w;
        while (ss >> w) widths.push_back(w);
        break;
    }
    if (widths.size() < 2) throw std::runtime_error("warp file: missing or short widths header");
    WarpNetwork net(widths);
    std::vector<double> flat;
    flat.reserve(net.param_count());
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) throw std::runtime_error("warp file line " + std::to_string(lineno) + ": not a number");
        flat.push_back(v);
    }
    if (flat.size() != net.param_count())
        throw std::runtime_error("warp file: expected " + std::to_string(net.param_count()) + " parameters, got " +
                                 std::to_string(flat.size()));
    net.set_parameters(flat);
    return net;
}

void save_warp(const std::filesystem::path& path, const WarpNetwork& net) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_warp(os, net);
}

WarpNetwork load_warp(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_warp(is);
}

} // namespace dklct
