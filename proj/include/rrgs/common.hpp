#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace rrgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Thrown when an operation's preconditions on its arguments are violated.
class InvalidParameterError : public std::invalid_argument {
public:
    explicit InvalidParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown when a caller breaks an API contract (e.g. backward without retained state).
class ContractViolationError : public std::logic_error {
public:
    explicit ContractViolationError(const std::string& msg) : std::logic_error(msg) {}
};

/// Thrown when a computation cannot proceed for numerical reasons.
class NumericalDegeneracyError : public std::runtime_error {
public:
    explicit NumericalDegeneracyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic RNG. Wraps mt19937_64 but does its own scalar conversions so
/// that streams are identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        // splitmix64; passes through the full 2^64 state space.
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Vec3 uniform_vec3(double lo, double hi) {
        const double x = uniform(lo, hi), y = uniform(lo, hi), z = uniform(lo, hi);
        return {x, y, z};
    }

    Vec3 normal_vec3(double sigma = 1.0) {
        const double x = normal(), y = normal(), z = normal();
        return Vec3{x, y, z} * sigma;
    }

    /// Uniformly distributed unit quaternion (w,x,y,z).
    Vec4 unit_quaternion() {
        Vec4 q;
        double n2 = 0.0;
        do {
            for (int i = 0; i < 4; ++i) q[i] = normal();
            n2 = q.squaredNorm();
        } while (n2 < 1e-12);
        return q / std::sqrt(n2);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Worker count for parallel sections: min(RRGS_THREADS, hardware). Never 0.
int worker_count();

/// Runs fn(i) for i in [0, n). Work is chunked independently of the worker
/// count; fn must write only to locations owned by index i so that results do
/// not depend on scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Rounds to a multiple of 2^-22; sums and differences of such values stay
/// exact in double precision while magnitudes are below ~2^30.
inline double dyadic(double x) {
    return std::round(x * 4194304.0) / 4194304.0;
}

inline Vec3 dyadic(const Vec3& v) { return {dyadic(v.x()), dyadic(v.y()), dyadic(v.z())}; }

}  // namespace rrgs
