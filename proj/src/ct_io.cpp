#include "dklct/ct.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace dklct {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) throw FormatError(where + ": empty field");
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(cell.c_str(), &end);
        if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
            throw FormatError(where + ": not a finite number: '" + cell + "'");
        out.push_back(v);
    }
    if (!text.empty() && text.back() == ',') throw FormatError(where + ": trailing comma");
    return out;
}

} // namespace

void save_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
    sino.validate();
    auto os = open_out(path);
    os << "# angles_deg: ";
    for (std::size_t i = 0; i < sino.geometry.projections(); ++i)
        os << (i ? "," : "") << fmt(sino.geometry.angles_deg[i]);
    os << "\n# n_detectors: " << sino.geometry.n_detectors << "\n# object_radius: " << fmt(sino.geometry.object_radius)
       << '\n';
    for (std::size_t p = 0; p < sino.values.rows(); ++p) {
        for (std::size_t j = 0; j < sino.values.cols(); ++j) os << (j ? "," : "") << fmt(sino.values(p, j));
        os << '\n';
    }
    finish(os, path);
}

Sinogram load_sinogram(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::optional<std::vector<double>> angles;
    std::optional<std::size_t> detectors;
    std::optional<double> radius;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const auto colon = t.find(':');
            if (colon == std::string::npos) continue;
            const std::string key = trim(t.substr(1, colon - 1));
            const std::string val = trim(t.substr(colon + 1));
            if (key == "angles_deg") {
                angles = parse_numbers(val, where);
            } else if (key == "n_detectors") {
                const auto v = parse_numbers(val, where);
                if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0]))
                    throw FormatError(where + ": n_detectors must be a positive integer");
                detectors = static_cast<std::size_t>(v[0]);
            } else if (key == "object_radius") {
                const auto v = parse_numbers(val, where);
                if (v.size() != 1) throw FormatError(where + ": object_radius must be a single number");
                radius = v[0];
            }
            continue;
        }
        if (!angles || !detectors || !radius) throw FormatError(where + ": data row before the complete header");
        auto row = parse_numbers(t, where);
        if (row.size() != *detectors)
            throw FormatError(where + ": expected " + std::to_string(*detectors) + " values, found " +
                              std::to_string(row.size()));
        if (rows.size() == angles->size()) throw FormatError(where + ": more rows than projection angles");
        rows.push_back(std::move(row));
    }
    if (!angles || !detectors || !radius) throw FormatError(path.string() + ": missing sinogram header");
    if (rows.size() != angles->size())
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(angles->size()) + " projection rows, found " + std::to_string(rows.size()));
    Sinogram sino{{*angles, *detectors, *radius}, Matrix(rows.size(), *detectors)};
    for (std::size_t p = 0; p < rows.size(); ++p)
        std::copy(rows[p].begin(), rows[p].end(), sino.values.row(p).begin());
    try {
        sino.validate();
    } catch (const std::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return sino;
}

void save_image_pgm(const std::filesystem::path& path, const ImageGrid& image, std::optional<ValueRange> range) {
    image.validate();
    ValueRange vr;
    if (range) {
        vr = *range;
        if (!std::isfinite(vr.lo) || !std::isfinite(vr.hi) || vr.hi < vr.lo)
            throw std::invalid_argument("save_image_pgm: invalid value range");
    } else {
        const auto [mn, mx] = std::minmax_element(image.values.begin(), image.values.end());
        vr = {*mn, *mx};
    }
    auto os = open_out(path);
    os << "P2\n" << image.nx << ' ' << image.ny << "\n65535\n";
    const double span = vr.hi - vr.lo;
    for (std::size_t iy = 0; iy < image.ny; ++iy) {
        for (std::size_t ix = 0; ix < image.nx; ++ix) {
            long level = 0;
            if (span > 0.0) {
                const double t = std::clamp((image.at(ix, iy) - vr.lo) / span, 0.0, 1.0);
                level = std::lround(t * 65535.0);
            }
            os << (ix ? " " : "") << level;
        }
        os << '\n';
    }
    finish(os, path);

    auto side_path = path;
    side_path += ".range";
    auto side = open_out(side_path);
    side << "min = " << fmt(vr.lo) << "\nmax = " << fmt(vr.hi) << '\n';
    finish(side, side_path);
}

void save_image_csv(const std::filesystem::path& path, const ImageGrid& image) {
    image.validate();
    auto os = open_out(path);
    for (std::size_t iy = 0; iy < image.ny; ++iy) {
        for (std::size_t ix = 0; ix < image.nx; ++ix) os << (ix ? "," : "") << fmt(image.at(ix, iy));
        os << '\n';
    }
    finish(os, path);
}

ImageGrid load_image_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        auto row = parse_numbers(t, where);
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(where + ": expected " + std::to_string(rows.front().size()) + " values, found " +
                              std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path.string() + ": no image rows");
    ImageGrid img(rows.front().size(), rows.size());
    for (std::size_t iy = 0; iy < img.ny; ++iy)
        for (std::size_t ix = 0; ix < img.nx; ++ix) img.at(ix, iy) = rows[iy][ix];
    return img;
}

} // namespace dklct
