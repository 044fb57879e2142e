#include "foaground/spatial_frame.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <nlohmann/json.hpp>

#include "foaground/io_util.hpp"
#include "foaground/json_util.hpp"

namespace foaground {

namespace {

void require_range(double value, double lo, double hi, const char* what) {
    if (!std::isfinite(value) || value < lo || value > hi) {
        throw Error(ErrorKind::Range, std::string(what) + " " + std::to_string(value) + " outside [" +
                                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

}  // namespace

DoA DoA::checked(double azimuth_deg, double elevation_deg) {
    DoA doa{azimuth_deg, elevation_deg};
    validate(doa);
    return doa;
}

void validate(const DoA& doa) {
    require_range(doa.azimuth_deg, -180.0, 180.0, "azimuth");
    require_range(doa.elevation_deg, -90.0, 90.0, "elevation");
}

void validate(const CameraIntrinsics& k) {
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(ErrorKind::Config, "focal lengths must be positive");
    if (k.width <= 0 || k.height <= 0) throw Error(ErrorKind::Config, "image size must be positive");
    if (!(k.cx >= 0.0 && k.cx < k.width) || !(k.cy >= 0.0 && k.cy < k.height)) {
        throw Error(ErrorKind::Config, "principal point outside the image");
    }
}

void validate(const Box3D& box) {
    if (!(box.extents.x > 0.0 && box.extents.y > 0.0 && box.extents.z > 0.0)) {
        throw Error(ErrorKind::Range, "box extents must be positive");
    }
}

FeatureGrid::FeatureGrid(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

Vec3 dir_from_angles(const DoA& doa) {
    validate(doa);
    const double az = deg2rad(doa.azimuth_deg);
    const double el = deg2rad(doa.elevation_deg);
    const double ce = std::cos(el);
    return {-ce * std::sin(az), std::sin(el), -ce * std::cos(az)};
}

DoA angles_from_dir(const Vec3& direction) {
    const double n = direction.norm();
    if (!(n > 1e-300) || !std::isfinite(n)) throw Error(ErrorKind::Degenerate, "direction has zero length");
    const Vec3 d = direction * (1.0 / n);
    const double el = rad2deg(std::asin(std::clamp(d.y, -1.0, 1.0)));
    if (std::abs(el) >= 90.0) return {0.0, el > 0 ? 90.0 : -90.0};
    double az = 0.0;
    if (d.x != 0.0 || d.z != 0.0) az = rad2deg(std::atan2(-d.x, -d.z));
    return {az, el};
}

double angular_error(const DoA& a, const DoA& b) {
    const Vec3 u = dir_from_angles(a);
    const Vec3 v = dir_from_angles(b);
    if (u == v) return 0.0;
    const Vec3 cross{u.y * v.z - u.z * v.y, u.z * v.x - u.x * v.z, u.x * v.y - u.y * v.x};
    return rad2deg(std::atan2(cross.norm(), u.dot(v)));
}

Vec3 backproject_pixel(double u, double v, double depth, const CameraIntrinsics& k) {
    const double px = depth * (u - k.cx) / k.fx;
    const double py = depth * (v - k.cy) / k.fy;
    return {px, -py, -depth};
}

PointCloud backproject(const DepthFrame& frame) {
    const auto& k = frame.intrinsics;
    validate(k);
    if (frame.depth.height != k.height || frame.depth.width != k.width ||
        frame.depth.size() != static_cast<std::size_t>(k.height) * static_cast<std::size_t>(k.width)) {
        throw Error(ErrorKind::Shape, "depth raster " + std::to_string(frame.depth.height) + "x" +
                                          std::to_string(frame.depth.width) + " does not match intrinsics " +
                                          std::to_string(k.height) + "x" + std::to_string(k.width));
    }
    PointCloud cloud{Raster<Vec3>(k.height, k.width), Raster<std::uint8_t>(k.height, k.width, 0)};
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const double d = frame.depth.at(v, u);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            cloud.points.at(v, u) = backproject_pixel(u, v, d, k);
            cloud.valid.at(v, u) = 1;
        }
    }
    return cloud;
}

PixelCoord project(const Vec3& point, const CameraIntrinsics& k) {
    const double depth = -point.z;
    if (!(depth > 0.0)) throw Error(ErrorKind::Projection, "point is not in front of the camera");
    return {k.fx * point.x / depth + k.cx, k.fy * (-point.y) / depth + k.cy};
}

PointCloud pool_coords(const PointCloud& cloud, int h, int w) {
    if (h <= 0 || w <= 0) throw Error(ErrorKind::Range, "pooled size must be positive");
    const int H = cloud.height();
    const int W = cloud.width();
    if (h > H || w > W) throw Error(ErrorKind::Range, "pooled size exceeds the input raster");

    PointCloud out{Raster<Vec3>(h, w), Raster<std::uint8_t>(h, w, 0)};
    for (int i = 0; i < h; ++i) {
        const int r0 = static_cast<int>((static_cast<long long>(i) * H) / h);
        const int r1 = static_cast<int>((static_cast<long long>(i + 1) * H + h - 1) / h);
        for (int j = 0; j < w; ++j) {
            const int c0 = static_cast<int>((static_cast<long long>(j) * W) / w);
            const int c1 = static_cast<int>((static_cast<long long>(j + 1) * W + w - 1) / w);
            Vec3 sum;
            long count = 0;
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) {
                    if (!cloud.valid.at(r, c)) continue;
                    sum += cloud.points.at(r, c);
                    ++count;
                }
            }
            if (count > 0) {
                out.points.at(i, j) = sum * (1.0 / static_cast<double>(count));
                out.valid.at(i, j) = 1;
            }
        }
    }
    return out;
}

FeatureGrid sinusoidal_pe(const PointCloud& coords, int channels) {
    if (channels <= 0 || channels % 6 != 0) {
        throw Error(ErrorKind::Config, "channel count " + std::to_string(channels) + " is not a positive multiple of 6");
    }
    const int per_axis = channels / 3;
    const int pairs = channels / 6;
    std::vector<double> inv_freq(static_cast<std::size_t>(pairs));
    for (int j = 0; j < pairs; ++j) {
        inv_freq[static_cast<std::size_t>(j)] = 1.0 / std::pow(10000.0, (2.0 * j) / per_axis);
    }

    FeatureGrid grid(coords.height(), coords.width(), channels);
    for (int r = 0; r < coords.height(); ++r) {
        for (int c = 0; c < coords.width(); ++c) {
            if (!coords.valid.at(r, c)) continue;
            const Vec3& p = coords.points.at(r, c);
            const std::array<double, 3> axes{p.x, p.y, p.z};
            for (int a = 0; a < 3; ++a) {
                for (int j = 0; j < pairs; ++j) {
                    const double arg = axes[static_cast<std::size_t>(a)] * inv_freq[static_cast<std::size_t>(j)];
                    grid.at(r, c, a * per_axis + 2 * j) = std::sin(arg);
                    grid.at(r, c, a * per_axis + 2 * j + 1) = std::cos(arg);
                }
            }
        }
    }
    return grid;
}

FeatureGrid fuse(const FeatureGrid& visual, const FeatureGrid& pe) {
    if (visual.height != pe.height || visual.width != pe.width || visual.channels != pe.channels ||
        visual.values.size() != pe.values.size()) {
        throw Error(ErrorKind::Shape, "feature grids differ in shape");
    }
    FeatureGrid out = visual;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += pe.values[i];
    return out;
}

double iou3d(const Box3D& a, const Box3D& b) {
    const Vec3 lo_a = a.min_corner(), hi_a = a.max_corner();
    const Vec3 lo_b = b.min_corner(), hi_b = b.max_corner();
    const double ix = std::max(0.0, std::min(hi_a.x, hi_b.x) - std::max(lo_a.x, lo_b.x));
    const double iy = std::max(0.0, std::min(hi_a.y, hi_b.y) - std::max(lo_a.y, lo_b.y));
    const double iz = std::max(0.0, std::min(hi_a.z, hi_b.z) - std::max(lo_a.z, lo_b.z));
    const double inter = ix * iy * iz;
    const double uni = a.volume() + b.volume() - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double center_offset(const Box3D& a, const Box3D& b) { return (a.center - b.center).norm(); }

Vec3 rotate_yaw(const Vec3& v, double yaw_deg) {
    const double t = deg2rad(yaw_deg);
    const double c = std::cos(t), s = std::sin(t);
    return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

nlohmann::json to_json(const CameraIntrinsics& k) {
    return {{"width", k.width}, {"height", k.height}, {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
    CameraIntrinsics k;
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    return k;
}

void write_depth_frame(const std::filesystem::path& stem, const DepthFrame& frame) {
    const auto& k = frame.intrinsics;
    validate(k);
    if (frame.depth.height != k.height || frame.depth.width != k.width) {
        throw Error(ErrorKind::Shape, "depth raster does not match intrinsics");
    }
    io::write_file(io::with_suffix(stem, ".json"), to_json(k).dump(2) + "\n");

    std::string raw;
    raw.reserve(frame.depth.size() * sizeof(float));
    for (double d : frame.depth.data) io::append_le<float>(raw, static_cast<float>(d));
    io::write_file(io::with_suffix(stem, ".bin"), raw);
}

DepthFrame read_depth_frame(const std::filesystem::path& stem) {
    DepthFrame frame;
    try {
        frame.intrinsics = intrinsics_from_json(nlohmann::json::parse(io::read_file(io::with_suffix(stem, ".json"))));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, "bad depth sidecar " + stem.string() + ": " + e.what());
    }
    validate(frame.intrinsics);
    const auto raw = io::read_file(io::with_suffix(stem, ".bin"));
    const auto n = static_cast<std::size_t>(frame.intrinsics.width) * static_cast<std::size_t>(frame.intrinsics.height);
    if (raw.size() != n * sizeof(float)) {
        throw Error(ErrorKind::Format, "depth raster holds " + std::to_string(raw.size()) + " bytes, expected " +
                                           std::to_string(n * sizeof(float)));
    }
    frame.depth = Raster<double>(frame.intrinsics.height, frame.intrinsics.width);
    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    for (std::size_t i = 0; i < n; ++i) frame.depth.data[i] = io::read_le<float>(p + i * sizeof(float));
    return frame;
}

}  // namespace foaground
