#pragma once

// Camera-frame conventions used everywhere in foaground:
//   x points right, y points up, z points backwards (right-handed).
//   Azimuth 0 is forward (-z), positive azimuth turns left (towards -x).
//   Elevation 0 is the horizontal plane, positive is up.
// All angles are stored in degrees.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "foaground/error.hpp"

namespace foaground {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

    [[nodiscard]] constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
};

// Azimuth/elevation pair in degrees. Construct through DoA::checked() when the
// values come from outside the library.
struct DoA {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;

    static DoA checked(double azimuth_deg, double elevation_deg);
    friend bool operator==(const DoA&, const DoA&) = default;
};

void validate(const DoA& doa);

struct CameraIntrinsics {
    double fx = 320.0;
    double fy = 320.0;
    double cx = 319.5;
    double cy = 239.5;
    int width = 640;
    int height = 480;

    friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

void validate(const CameraIntrinsics& k);

// Row-major height x width raster.
template <typename T>
struct Raster {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Raster() = default;
    Raster(int h, int w, const T& fill = T{})
        : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    T& at(int row, int col) { return data[index(row, col)]; }
    const T& at(int row, int col) const { return data[index(row, col)]; }
    [[nodiscard]] std::size_t size() const { return data.size(); }

    [[nodiscard]] std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
    }

    friend bool operator==(const Raster&, const Raster&) = default;
};

// Metric depth in meters; 0 marks an invalid pixel.
struct DepthFrame {
    Raster<double> depth;
    CameraIntrinsics intrinsics;
};

// Camera-frame points plus a validity mask (1 = valid). Invalid entries hold
// zero coordinates and must be skipped by every consumer.
struct PointCloud {
    Raster<Vec3> points;
    Raster<std::uint8_t> valid;

    [[nodiscard]] int height() const { return points.height; }
    [[nodiscard]] int width() const { return points.width; }
};

// h x w x c feature tensor, channel-fastest layout.
struct FeatureGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    FeatureGrid() = default;
    FeatureGrid(int h, int w, int c, double fill = 0.0);

    double& at(int row, int col, int ch) { return values[offset(row, col, ch)]; }
    [[nodiscard]] double at(int row, int col, int ch) const { return values[offset(row, col, ch)]; }

    [[nodiscard]] std::size_t offset(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(ch);
    }
};

struct Box3D {
    std::string category = "speaker";
    Vec3 center;
    Vec3 extents;  // full side lengths (s_x, s_y, s_z), all > 0

    [[nodiscard]] Vec3 min_corner() const { return center - 0.5 * extents; }
    [[nodiscard]] Vec3 max_corner() const { return center + 0.5 * extents; }
    [[nodiscard]] double volume() const { return extents.x * extents.y * extents.z; }
    friend bool operator==(const Box3D&, const Box3D&) = default;
};

void validate(const Box3D& box);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Unit direction for an azimuth/elevation pair:
// (-cos(el) sin(az), sin(el), -cos(el) cos(az)).
Vec3 dir_from_angles(const DoA& doa);

// Inverse of dir_from_angles. The input is normalized first; azimuth is
// reported as 0 when the direction is a pole.
DoA angles_from_dir(const Vec3& direction);

// Great-circle angle in degrees.
double angular_error(const DoA& a, const DoA& b);

// Lift every pixel with depth > 0 into camera-frame meters.
PointCloud backproject(const DepthFrame& frame);

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
};

// Pinhole projection of a camera-frame point with z < 0.
PixelCoord project(const Vec3& point, const CameraIntrinsics& k);

// Camera-frame point seen at pixel (u, v) with the given pinhole depth.
Vec3 backproject_pixel(double u, double v, double depth, const CameraIntrinsics& k);

// Adaptive average pooling to h x w. Window i spans
// [floor(i*H/h), ceil((i+1)*H/h)). Cells without any valid point are masked.
PointCloud pool_coords(const PointCloud& cloud, int h, int w);

// Sinusoidal encoding of each coordinate into c/3 channels per axis, axis
// blocks in x, y, z order. Masked cells encode to all zeros.
FeatureGrid sinusoidal_pe(const PointCloud& coords, int channels);

FeatureGrid fuse(const FeatureGrid& visual, const FeatureGrid& pe);

double iou3d(const Box3D& a, const Box3D& b);
double center_offset(const Box3D& a, const Box3D& b);

// Rotation about the world up axis; positive yaw turns left.
Vec3 rotate_yaw(const Vec3& v, double yaw_deg);

// DepthFrame on disk: "<stem>.json" with {width,height,fx,fy,cx,cy} and
// "<stem>.bin" holding float32 little-endian meters, row-major from top-left.
void write_depth_frame(const std::filesystem::path& stem, const DepthFrame& frame);
DepthFrame read_depth_frame(const std::filesystem::path& stem);

}  // namespace foaground
