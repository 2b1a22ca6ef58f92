#pragma once

// Latent input map u(x): either the identity or a fully connected network
// with tanh hidden layers and a linear output layer.

#include "dklct/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

namespace dklct {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights; ///< out×in, row-major
    std::vector<double> biases;  ///< out

    double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
    double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

struct WarpGradient {
    std::vector<double> params; ///< same layout as WarpNetwork::parameters()
    std::vector<double> input;
};

class WarpNetwork {
public:
    /// Zero-initialized network; widths[0] is the input dimension, widths.back() the output.
    explicit WarpNetwork(std::vector<std::size_t> widths);

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const noexcept { return widths_.front(); }
    std::size_t output_dim() const noexcept { return widths_.back(); }
    std::size_t param_count() const noexcept { return param_count_; }

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    /// Flat layout: per layer, weights (row-major) then biases.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    std::vector<double> forward(std::span<const double> x) const;

    /// Reverse-mode derivatives of cotangentᵀ·u(x).
    WarpGradient gradient(std::span<const double> x, std::span<const double> cotangent) const;

    /// Activations for a batch stored feature-major: activations[l] is
    /// widths[l] × batch, activations[0] the inputs.
    struct Tape {
        std::vector<Matrix> activations;
        const Matrix& output() const { return activations.back(); }
    };

    Tape forward_batch(Matrix inputs) const;

    /// Accumulates into `dparams` the derivative of Σ_b du(:,b)ᵀ·u(x_b); when
    /// `dinputs` is non-null it receives the input cotangents (input_dim × batch).
    void backward_batch(const Tape& tape, Matrix du, std::span<double> dparams, Matrix* dinputs = nullptr) const;

private:
    std::vector<std::size_t> widths_;
    std::vector<DenseLayer> layers_;
    std::size_t param_count_ = 0;
};

/// u(x) = x.
struct IdentityWarp {
    std::size_t dim = 1;
};

using Warp = std::variant<IdentityWarp, WarpNetwork>;

std::size_t warp_input_dim(const Warp& w);
std::size_t warp_output_dim(const Warp& w);
std::size_t warp_param_count(const Warp& w);

/// Weights uniform in ±fan_in^{-1/2}, biases zero.
WarpNetwork init_params(std::vector<std::size_t> widths, std::uint64_t seed);

void write_warp(std::ostream& os, const WarpNetwork& net);
WarpNetwork read_warp(std::istream& is);
void save_warp(const std::filesystem::path& path, const WarpNetwork& net);
WarpNetwork load_warp(const std::filesystem::path& path);

} // namespace dklct
