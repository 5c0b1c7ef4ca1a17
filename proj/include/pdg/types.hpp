#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pdg {

constexpr int kNx = 14;   // physical state
constexpr int kNu = 5;    // physical control
constexpr int kNxa = 16;  // augmented state: + y, t
constexpr int kNua = 6;   // augmented control: + s

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using VecX = Eigen::Matrix<double, kNx, 1>;
using VecU = Eigen::Matrix<double, kNu, 1>;
using VecXa = Eigen::Matrix<double, kNxa, 1>;
using VecUa = Eigen::Matrix<double, kNua, 1>;
using Mat3 = Eigen::Matrix3d;
using MatXX = Eigen::Matrix<double, kNx, kNx>;
using MatXU = Eigen::Matrix<double, kNx, kNu>;
using MatXaXa = Eigen::Matrix<double, kNxa, kNxa>;
using MatXaUa = Eigen::Matrix<double, kNxa, kNua>;

// Augmented state layout.
namespace ix {
constexpr int m = 0, r = 1, v = 4, q = 7, w = 11, y = 14, t = 15;
}
// Augmented control layout.
namespace iu {
constexpr int T = 0, de = 1, pe = 2, db = 3, pb = 4, s = 5;
}

struct PropagationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDeg = kPi / 180.0;

}  // namespace pdg
