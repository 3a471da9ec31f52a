#pragma once

#include <string>
#include <vector>

#include "wact/error.hpp"

namespace wact {

// Canonical viewpoint label sets: faces F/L/R/U/D, bodies F/S/B.
// Labels map to fixed azimuth angles (radians in [0, 2pi)); the up/down face
// labels collapse onto the frontal azimuth and are distinguished by label
// equality, not geometry.
//   body: F=0, S=pi/2, B=pi
//   face: F=0, R=pi/4, L=2pi-pi/4, U=0, D=0
inline const std::vector<std::string>& face_view_labels() {
    static const std::vector<std::string> labels = {"F", "L", "R", "U", "D"};
    return labels;
}

inline const std::vector<std::string>& body_view_labels() {
    static const std::vector<std::string> labels = {"F", "S", "B"};
    return labels;
}

double face_view_angle(const std::string& label);   // ValidationError on unknown label
double body_view_angle(const std::string& label);

bool is_face_view(const std::string& label);
bool is_body_view(const std::string& label);

// min(|a-b|, 2pi - |a-b|) after normalization
double circular_distance(double a, double b);

// wraps into [0, 2pi)
double normalize_angle(double theta);

} // namespace wact
