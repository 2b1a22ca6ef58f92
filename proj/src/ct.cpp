#include "dklct/ct.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace dklct {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void add_noise(Matrix& values, NoiseSpec noise) {
    if (noise.sigma < 0.0 || !std::isfinite(noise.sigma)) throw std::invalid_argument("noise sigma must be >= 0");
    if (noise.sigma == 0.0) return;
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : values.data()) v += noise.sigma * gauss(rng);
}

template <class Fn>
Sinogram project_with(const ProjectionGeometry& geo, NoiseSpec noise, Fn&& integrate) {
    geo.validate();
    Sinogram out{geo, Matrix(geo.projections(), geo.n_detectors)};
    for (const auto& l : make_lines(geo)) out.values(l.projection, l.detector) = integrate(l.line);
    add_noise(out.values, noise);
    return out;
}

} // namespace

ProjectionGeometry ProjectionGeometry::evenly_spaced(std::size_t count, double first_deg, double last_deg,
                                                     std::size_t n_detectors, double object_radius) {
    if (count == 0) throw std::invalid_argument("evenly_spaced: need at least one angle");
    ProjectionGeometry geo{{}, n_detectors, object_radius};
    for (std::size_t i = 0; i < count; ++i)
        geo.angles_deg.push_back(count == 1 ? first_deg
                                            : first_deg + (last_deg - first_deg) * static_cast<double>(i) /
                                                              static_cast<double>(count - 1));
    geo.validate();
    return geo;
}

void ProjectionGeometry::validate() const {
    if (angles_deg.empty()) throw std::invalid_argument("geometry: no projection angles");
    if (n_detectors < 1) throw std::invalid_argument("geometry: n_detectors must be >= 1");
    if (!(object_radius > 0.0) || !std::isfinite(object_radius))
        throw std::invalid_argument("geometry: object_radius must be positive");
    for (double a : angles_deg)
        if (!std::isfinite(a)) throw std::invalid_argument("geometry: non-finite angle");
}

double ProjectionGeometry::detector_offset(std::size_t j) const {
    const double cell = 2.0 * object_radius / static_cast<double>(n_detectors);
    return -object_radius + (static_cast<double>(j) + 0.5) * cell;
}

void Sinogram::validate() const {
    geometry.validate();
    if (values.rows() != geometry.projections() || values.cols() != geometry.n_detectors)
        throw DimensionError("sinogram: values are " + std::to_string(values.rows()) + "x" +
                             std::to_string(values.cols()) + ", geometry expects " +
                             std::to_string(geometry.projections()) + "x" + std::to_string(geometry.n_detectors));
    for (double v : values.data())
        if (!std::isfinite(v)) throw std::invalid_argument("sinogram: non-finite value");
}

ImageGrid::ImageGrid(std::size_t nx_, std::size_t ny_) : nx(nx_), ny(ny_), values(nx_ * ny_, 0.0) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("image grid: resolution must be positive");
}

Matrix ImageGrid::centers() const {
    Matrix c(nx * ny, 2);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
            c(iy * nx + ix, 0) = x(ix);
            c(iy * nx + ix, 1) = y(iy);
        }
    return c;
}

double ImageGrid::sample(double px, double py) const {
    const double fx = (px + 1.0) * static_cast<double>(nx) / 2.0 - 0.5;
    const double fy = (1.0 - py) * static_cast<double>(ny) / 2.0 - 0.5;
    const double flx = std::floor(fx), fly = std::floor(fy);
    const double tx = fx - flx, ty = fy - fly;
    const auto ix = static_cast<long long>(flx), iy = static_cast<long long>(fly);
    const auto pix = [&](long long i, long long j) {
        if (i < 0 || j < 0 || i >= static_cast<long long>(nx) || j >= static_cast<long long>(ny)) return 0.0;
        return at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    };
    return (1.0 - ty) * ((1.0 - tx) * pix(ix, iy) + tx * pix(ix + 1, iy)) +
           ty * ((1.0 - tx) * pix(ix, iy + 1) + tx * pix(ix + 1, iy + 1));
}

void ImageGrid::validate() const {
    if (nx == 0 || ny == 0) throw std::invalid_argument("image grid: resolution must be positive");
    if (values.size() != nx * ny) throw DimensionError("image grid: value count does not match resolution");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("image grid: non-finite pixel");
}

std::vector<CtLine> make_lines(const ProjectionGeometry& geo) {
    geo.validate();
    const double rr = geo.object_radius;
    std::vector<CtLine> out;
    out.reserve(geo.projections() * geo.n_detectors);
    for (std::size_t p = 0; p < geo.projections(); ++p) {
        const double a = geo.angles_deg[p] * kDeg;
        const double c = std::cos(a), s = std::sin(a);
        for (std::size_t j = 0; j < geo.n_detectors; ++j) {
            const double d = geo.detector_offset(j);
            if (std::abs(d) >= rr) continue;
            const double r = std::sqrt((rr - d) * (rr + d));
            out.push_back({p, j, {{d * c, d * s}, {-s, c}, r, 0.0}});
        }
    }
    return out;
}

std::vector<LineMeasurement> sinogram_lines(const Sinogram& sino) {
    sino.validate();
    std::vector<LineMeasurement> out;
    for (auto& l : make_lines(sino.geometry)) {
        l.line.value = sino.values(l.projection, l.detector);
        out.push_back(std::move(l.line));
    }
    return out;
}

std::vector<Ellipse> shepp_logan_ellipses() {
    return {
        {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},   {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
        {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0}, {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
        {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},    {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
        {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},   {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
        {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},   {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
    };
}

std::vector<Ellipse> disc_phantom(double radius, double intensity) {
    if (!(radius > 0.0)) throw std::invalid_argument("disc_phantom: radius must be positive");
    return {{intensity, radius, radius, 0.0, 0.0, 0.0}};
}

double phantom_value(std::span<const Ellipse> ellipses, double x, double y) {
    double v = 0.0;
    for (const auto& e : ellipses) {
        const double c = std::cos(e.phi_deg * kDeg), s = std::sin(e.phi_deg * kDeg);
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = (c * dx + s * dy) / e.a, w = (-s * dx + c * dy) / e.b;
        if (u * u + w * w <= 1.0) v += e.intensity;
    }
    return v;
}

double phantom_line_integral(std::span<const Ellipse> ellipses, const LineMeasurement& line) {
    line.validate();
    if (line.center.size() != 2) throw DimensionError("phantom_line_integral: lines must be 2-D");
    double total = 0.0;
    const double r = line.half_length;
    for (const auto& e : ellipses) {
        const double c = std::cos(e.phi_deg * kDeg), s = std::sin(e.phi_deg * kDeg);
        const double dx = line.center[0] - e.x0, dy = line.center[1] - e.y0;
        const double qx = (c * dx + s * dy) / e.a, qy = (-s * dx + c * dy) / e.b;
        const double mx = (c * line.direction[0] + s * line.direction[1]) / e.a;
        const double my = (-s * line.direction[0] + c * line.direction[1]) / e.b;
        const double qa = mx * mx + my * my;
        const double qb = qx * mx + qy * my;
        const double qc = qx * qx + qy * qy - 1.0;
        const double disc = qb * qb - qa * qc;
        if (disc <= 0.0) continue;
        const double root = std::sqrt(disc);
        const double s1 = (-qb - root) / qa, s2 = (-qb + root) / qa;
        const double len = std::min(s2, r) - std::max(s1, -r);
        if (len > 0.0) total += e.intensity * len;
    }
    return total;
}

ImageGrid rasterize(std::span<const Ellipse> ellipses, std::size_t nx, std::size_t ny) {
    ImageGrid img(nx, ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) img.at(ix, iy) = phantom_value(ellipses, img.x(ix), img.y(iy));
    return img;
}

ImageGrid shepp_logan(std::size_t nx, std::size_t ny) { return rasterize(shepp_logan_ellipses(), nx, ny); }

Sinogram forward_project(const ImageGrid& image, const ProjectionGeometry& geo, std::size_t n_nodes,
                         NoiseSpec noise) {
    image.validate();
    const PointFunction f = [&](std::span<const double> p) { return image.sample(p[0], p[1]); };
    return forward_project(f, geo, n_nodes, noise);
}

Sinogram forward_project(const PointFunction& field, const ProjectionGeometry& geo, std::size_t n_nodes,
                         NoiseSpec noise) {
    return project_with(geo, noise, [&](const LineMeasurement& l) { return simpson_line_integral(field, l, n_nodes); });
}

Sinogram forward_project(std::span<const Ellipse> ellipses, const ProjectionGeometry& geo, NoiseSpec noise) {
    return project_with(geo, noise, [&](const LineMeasurement& l) { return phantom_line_integral(ellipses, l); });
}

double image_rmse(const ImageGrid& a, const ImageGrid& b) {
    if (a.nx != b.nx || a.ny != b.ny) throw DimensionError("image_rmse: resolution mismatch");
    double ss = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) ss += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    return std::sqrt(ss / static_cast<double>(a.values.size()));
}

} // namespace dklct
