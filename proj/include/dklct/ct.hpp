#pragma once

// Parallel-beam computed tomography on the square [-1, 1]².
//
// Angles α are in degrees, counterclockwise from the +x axis. For detector
// offset d the beam travels along n̂ = (−sin α, cos α) through the foot point
// x⁰ = d·(cos α, sin α), and the measured segment is the chord of the circle
// of radius object_radius, so r = √(object_radius² − d²). Detector offsets
// are the midpoints of n_detectors equal cells spanning
// [−object_radius, object_radius]. Sinogram rows are projections, columns
// detectors.

#include "dklct/linalg.hpp"
#include "dklct/quad.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dklct {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProjectionGeometry {
    std::vector<double> angles_deg;
    std::size_t n_detectors = 1;
    double object_radius = 1.0;

    /// `count` angles evenly spaced over [first, last] (both included).
    static ProjectionGeometry evenly_spaced(std::size_t count, double first_deg, double last_deg,
                                            std::size_t n_detectors, double object_radius = 1.0);

    void validate() const;
    std::size_t projections() const noexcept { return angles_deg.size(); }
    double detector_offset(std::size_t j) const;
};

struct Sinogram {
    ProjectionGeometry geometry;
    Matrix values; ///< projections × n_detectors

    void validate() const;
};

/// Pixel grid over [-1, 1]². Row 0 is the top (y = 1), column 0 the left.
struct ImageGrid {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::vector<double> values; ///< ny rows of nx pixels

    ImageGrid() : values(1, 0.0) {}
    ImageGrid(std::size_t nx, std::size_t ny);

    double x(std::size_t ix) const { return -1.0 + (static_cast<double>(ix) + 0.5) * 2.0 / static_cast<double>(nx); }
    double y(std::size_t iy) const { return 1.0 - (static_cast<double>(iy) + 0.5) * 2.0 / static_cast<double>(ny); }
    double& at(std::size_t ix, std::size_t iy) { return values[iy * nx + ix]; }
    double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }

    /// Pixel centers, one per row, in storage order.
    Matrix centers() const;
    /// Bilinear interpolation between pixel centers; zero beyond the outer pixel ring.
    double sample(double px, double py) const;
    void validate() const;
};

struct CtLine {
    std::size_t projection = 0;
    std::size_t detector = 0;
    LineMeasurement line;
};

/// One line per (projection, detector) with |d| < object_radius; values are zero.
std::vector<CtLine> make_lines(const ProjectionGeometry& geo);

/// Measurement list from a sinogram, in make_lines order.
std::vector<LineMeasurement> sinogram_lines(const Sinogram& sino);

struct Ellipse {
    double intensity = 0.0;
    double a = 0.0;         ///< semi-axis along x before rotation
    double b = 0.0;         ///< semi-axis along y before rotation
    double x0 = 0.0;
    double y0 = 0.0;
    double phi_deg = 0.0;   ///< counterclockwise rotation
};

/// The ten-ellipse head phantom with the original intensities.
std::vector<Ellipse> shepp_logan_ellipses();
/// Uniform disc as a single ellipse.
std::vector<Ellipse> disc_phantom(double radius, double intensity = 1.0);

double phantom_value(std::span<const Ellipse> ellipses, double x, double y);
/// Exact line integral over the segment of `line` (sum of chord lengths times intensity).
double phantom_line_integral(std::span<const Ellipse> ellipses, const LineMeasurement& line);

ImageGrid rasterize(std::span<const Ellipse> ellipses, std::size_t nx, std::size_t ny);
ImageGrid shepp_logan(std::size_t nx, std::size_t ny);

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Simpson integrals of the bilinear image along every line.
Sinogram forward_project(const ImageGrid& image, const ProjectionGeometry& geo, std::size_t n_nodes = 301,
                         NoiseSpec noise = {});
/// Simpson integrals of an arbitrary field.
Sinogram forward_project(const PointFunction& field, const ProjectionGeometry& geo, std::size_t n_nodes = 301,
                         NoiseSpec noise = {});
/// Exact integrals of an ellipse phantom.
Sinogram forward_project(std::span<const Ellipse> ellipses, const ProjectionGeometry& geo, NoiseSpec noise = {});

/// Filtered back projection with the Ram-Lak filter.
ImageGrid fbp_reconstruct(const Sinogram& sino, std::size_t nx, std::size_t ny);

/// Root-mean-square difference over all pixels.
double image_rmse(const ImageGrid& a, const ImageGrid& b);

void save_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram load_sinogram(const std::filesystem::path& path);

struct ValueRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Plain PGM (P2, maxval 65535). Values map linearly from `range` (default:
/// the image min/max) to [0, 65535]; the range goes to `<path>.range`.
void save_image_pgm(const std::filesystem::path& path, const ImageGrid& image,
                    std::optional<ValueRange> range = std::nullopt);
void save_image_csv(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid load_image_csv(const std::filesystem::path& path);

} // namespace dklct
