#include "wact/views.hpp"

#include <cmath>

namespace wact {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
} // namespace

double normalize_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
}

double circular_distance(double a, double b) {
    double d = std::fabs(normalize_angle(a) - normalize_angle(b));
    return std::min(d, kTwoPi - d);
}

double face_view_angle(const std::string& label) {
    if (label == "F" || label == "U" || label == "D") return 0.0;
    if (label == "R") return kPi / 4.0;
    if (label == "L") return kTwoPi - kPi / 4.0;
    throw ValidationError("unknown face view label '" + label + "'");
}

double body_view_angle(const std::string& label) {
    if (label == "F") return 0.0;
    if (label == "S") return kPi / 2.0;
    if (label == "B") return kPi;
    throw ValidationError("unknown body view label '" + label + "'");
}

bool is_face_view(const std::string& label) {
    for (const auto& l : face_view_labels())
        if (l == label) return true;
    return false;
}

bool is_body_view(const std::string& label) {
    for (const auto& l : body_view_labels())
        if (l == label) return true;
    return false;
}

} // namespace wact
