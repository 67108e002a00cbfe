#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace p3p {

inline constexpr double kPi = 3.14159265358979323846;

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input violates a documented type invariant (non-finite value, non-unit
/// bearing, coincident feature points, ...).
struct InvalidInput : Error {
    using Error::Error;
};

template <typename T>
struct Vec3T {
    T x{}, y{}, z{};

    constexpr T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3T operator+(const Vec3T& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3T operator-(const Vec3T& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3T operator-() const { return {-x, -y, -z}; }
    constexpr Vec3T operator*(T s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3T operator/(T s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3T& operator+=(const Vec3T& o) { x += o.x; y += o.y; z += o.z; return *this; }

    constexpr T dot(const Vec3T& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3T cross(const Vec3T& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    constexpr T squared_norm() const { return dot(*this); }
    T norm() const { return std::sqrt(squared_norm()); }

    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

template <typename T>
constexpr Vec3T<T> operator*(T s, const Vec3T<T>& v) { return v * s; }

template <typename T>
constexpr T dot(const Vec3T<T>& a, const Vec3T<T>& b) { return a.dot(b); }

template <typename T>
constexpr Vec3T<T> cross(const Vec3T<T>& a, const Vec3T<T>& b) { return a.cross(b); }

/// 3x3 matrix, row-major.
template <typename T>
struct Mat3T {
    std::array<T, 9> m{};

    constexpr T& operator()(int r, int c) { return m[3 * r + c]; }
    constexpr const T& operator()(int r, int c) const { return m[3 * r + c]; }

    static constexpr Mat3T identity() { return {{T(1), 0, 0, 0, T(1), 0, 0, 0, T(1)}}; }
    static constexpr Mat3T zero() { return {}; }

    /// Matrix with the given columns.
    static constexpr Mat3T from_columns(const Vec3T<T>& c0, const Vec3T<T>& c1, const Vec3T<T>& c2) {
        return {{c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z}};
    }
    /// Matrix with the given rows.
    static constexpr Mat3T from_rows(const Vec3T<T>& r0, const Vec3T<T>& r1, const Vec3T<T>& r2) {
        return {{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
    }
    /// Outer product a b^T.
    static constexpr Mat3T outer(const Vec3T<T>& a, const Vec3T<T>& b) {
        return {{a.x * b.x, a.x * b.y, a.x * b.z,
                 a.y * b.x, a.y * b.y, a.y * b.z,
                 a.z * b.x, a.z * b.y, a.z * b.z}};
    }

    constexpr Vec3T<T> row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
    constexpr Vec3T<T> col(int c) const { return {m[c], m[c + 3], m[c + 6]}; }

    constexpr Mat3T transposed() const {
        return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
    }

    constexpr T trace() const { return m[0] + m[4] + m[8]; }

    constexpr T determinant() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7])
             - m[1] * (m[3] * m[8] - m[5] * m[6])
             + m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    constexpr Mat3T operator+(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    constexpr Mat3T operator-(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] - o.m[i];
        return r;
    }
    constexpr Mat3T operator*(T s) const {
        Mat3T r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }
    constexpr Mat3T operator*(const Mat3T& o) const {
        Mat3T r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) + (*this)(i, 2) * o(2, j);
        return r;
    }
    constexpr Vec3T<T> operator*(const Vec3T<T>& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    /// Largest absolute entry of (this - o).
    T max_abs_diff(const Mat3T& o) const {
        T w = 0;
        for (int i = 0; i < 9; ++i) w = std::max(w, std::abs(m[i] - o.m[i]));
        return w;
    }

    bool finite() const {
        for (T v : m)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

template <typename T>
constexpr Mat3T<T> operator*(T s, const Mat3T<T>& a) { return a * s; }

namespace tol {
inline constexpr double unit_norm = 1e-12;    ///< |norm - 1| bound for unit vectors
inline constexpr double orthonormal = 1e-10;  ///< per-entry bound on C^T C - I and |det - 1|
}  // namespace tol

/// Unit-norm 3-vector. Construction checks the invariant; use normalized() to
/// build one from an arbitrary non-zero vector.
template <typename T>
class UnitVec3T {
public:
    UnitVec3T(T x, T y, T z) : UnitVec3T(Vec3T<T>{x, y, z}) {}

    explicit UnitVec3T(const Vec3T<T>& v) : v_(v) {
        if (!v.finite() || std::abs(v.norm() - T(1)) > T(tol::unit_norm))
            throw InvalidInput("UnitVec3: vector is not unit length");
    }

    /// Scale an arbitrary vector to unit length. Throws on (near-)zero input.
    static UnitVec3T normalized(const Vec3T<T>& v) {
        const T n = v.norm();
        if (!(n > T(0)) || !std::isfinite(n))
            throw InvalidInput("UnitVec3: cannot normalize zero or non-finite vector");
        return UnitVec3T(v / n, unchecked_tag{});
    }

    const Vec3T<T>& vec() const { return v_; }
    operator const Vec3T<T>&() const { return v_; }

    T x() const { return v_.x; }
    T y() const { return v_.y; }
    T z() const { return v_.z; }

    T dot(const Vec3T<T>& o) const { return v_.dot(o); }
    Vec3T<T> cross(const Vec3T<T>& o) const { return v_.cross(o); }
    UnitVec3T operator-() const { return UnitVec3T(-v_, unchecked_tag{}); }

    struct unchecked_tag {};
    UnitVec3T(const Vec3T<T>& v, unchecked_tag) : v_(v) {}

private:
    Vec3T<T> v_;
};

template <typename T>
inline UnitVec3T<T> unit_x() { return {Vec3T<T>{1, 0, 0}, typename UnitVec3T<T>::unchecked_tag{}}; }
template <typename T>
inline UnitVec3T<T> unit_y() { return {Vec3T<T>{0, 1, 0}, typename UnitVec3T<T>::unchecked_tag{}}; }
template <typename T>
inline UnitVec3T<T> unit_z() { return {Vec3T<T>{0, 0, 1}, typename UnitVec3T<T>::unchecked_tag{}}; }

/// Skew-symmetric matrix of v: skew(v) * a == v x a.
template <typename T>
constexpr Mat3T<T> skew(const Vec3T<T>& v) {
    return {{0, -v.z, v.y,
             v.z, 0, -v.x,
             -v.y, v.x, 0}};
}

/// Proper rotation matrix (orthonormal, det +1).
template <typename T>
class RotMatT {
public:
    /// Validating constructor; throws InvalidInput unless the matrix is
    /// orthonormal with determinant +1 within tol::orthonormal.
    static RotMatT from_matrix(const Mat3T<T>& m) {
        RotMatT r(m, unchecked_tag{});
        if (!r.is_valid()) throw InvalidInput("RotMat: matrix is not a proper rotation");
        return r;
    }

    const Mat3T<T>& matrix() const { return m_; }

    bool is_valid() const {
        if (!m_.finite()) return false;
        const Mat3T<T> gram = m_.transposed() * m_;
        if (gram.max_abs_diff(Mat3T<T>::identity()) > T(tol::orthonormal)) return false;
        return std::abs(m_.determinant() - T(1)) <= T(tol::orthonormal);
    }

    RotMatT transposed() const { return RotMatT(m_.transposed(), unchecked_tag{}); }

    Vec3T<T> operator*(const Vec3T<T>& v) const { return m_ * v; }
    RotMatT operator*(const RotMatT& o) const { return RotMatT(m_ * o.m_, unchecked_tag{}); }

    T operator()(int r, int c) const { return m_(r, c); }

    struct unchecked_tag {};
    RotMatT(const Mat3T<T>& m, unchecked_tag) : m_(m) {}

private:
    Mat3T<T> m_;
};

/// Axis-angle rotation about unit vector k by angle theta, with the
/// left-hand-rule sign convention used throughout this library:
///
///     C(k, theta) = cos(theta) I - sin(theta) skew(k) + (1 - cos(theta)) k k^T
///
/// Note the minus on the sin term. Most rotation libraries (Eigen, Sophus,
/// OpenCV) use the opposite sign; C(k, theta) here equals their rotation by
/// -theta about k.
template <typename T>
RotMatT<T> rodrigues(const UnitVec3T<T>& k, T theta) {
    const T c = std::cos(theta);
    const T s = std::sin(theta);
    const Mat3T<T> m = Mat3T<T>::identity() * c - skew(k.vec()) * s
                     + Mat3T<T>::outer(k.vec(), k.vec()) * (T(1) - c);
    return RotMatT<T>(m, typename RotMatT<T>::unchecked_tag{});
}

/// Decomposition of C(k, theta) * v into a * cos(theta) + b * sin(theta) + c.
template <typename T>
struct LinearRotation {
    Vec3T<T> a;  ///< -skew(k)^2 v
    Vec3T<T> b;  ///< -skew(k) v
    Vec3T<T> c;  ///< (k . v) k
};

/// Express the rotated vector C(k, theta) * v as a linear function of
/// [cos(theta), sin(theta)].
template <typename T>
LinearRotation<T> rotate_linear_form(const UnitVec3T<T>& k, const Vec3T<T>& v) {
    const T kv = k.dot(v);
    return {v - k.vec() * kv,  // -skew(k)^2 v  ==  (I - k k^T) v
            v.cross(k.vec()),  // -skew(k) v
            k.vec() * kv};
}

/// Magnitude in [0, pi] of the rotation angle taking C_true to C_est,
/// i.e. the axis-angle magnitude of C_est * C_true^T. Computed as
/// atan2(|vee(M - M^T)|/2, (trace(M) - 1)/2), which stays accurate for
/// near-identity relative rotations where the pure-arccos form loses half
/// the significant digits. The cosine term is clamped to [-1, 1].
template <typename T>
T rotation_angle_error(const RotMatT<T>& c_est, const RotMatT<T>& c_true) {
    const Mat3T<T> m = c_est.matrix() * c_true.matrix().transposed();
    const Vec3T<T> v{m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
    const T s = T(0.5) * v.norm();
    T c = T(0.5) * (m.trace() - T(1));
    c = std::min(T(1), std::max(T(-1), c));
    return std::abs(std::atan2(s, c));
}

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;
using UnitVec3 = UnitVec3T<double>;
using RotMat = RotMatT<double>;
using LinearRotationD = LinearRotation<double>;

}  // namespace p3p
