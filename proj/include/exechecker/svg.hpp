#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "exechecker/annotation.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/joa.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

// Stick-figure rendering of one frame: bones as line segments, one circle per
// joint with radius proportional to its normalized score, the top-k joints
// filled red, annotated joints outlined. Orthographic projection onto the two
// highest-variance world axes of the displayed frame.
inline std::string render_skeleton_svg(const SkeletonSequence& seq, const SkeletonTopology& topo,
                                       const std::vector<double>& normalized,
                                       const std::vector<int>& top,
                                       const JoAAnnotation* annotation = nullptr, int frame = -1) {
    if (static_cast<int>(normalized.size()) != seq.num_joints)
        throw ShapeError("svg: score count does not match joints");
    if (frame < 0) frame = seq.num_frames / 2;
    if (frame >= seq.num_frames) throw IndexError("svg: frame out of range");

    // pick the two world axes with the largest joint spread in this frame
    std::array<double, 3> mean = {0, 0, 0}, var = {0, 0, 0};
    for (int j = 0; j < seq.num_joints; ++j)
        for (int c = 0; c < 3; ++c) mean[static_cast<std::size_t>(c)] += seq.pos(frame, j)[c];
    for (auto& m : mean) m /= seq.num_joints;
    for (int j = 0; j < seq.num_joints; ++j)
        for (int c = 0; c < 3; ++c) {
            double d = seq.pos(frame, j)[c] - mean[static_cast<std::size_t>(c)];
            var[static_cast<std::size_t>(c)] += d * d;
        }
    int ax = 0, ay = 1;
    {
        std::array<int, 3> order = {0, 1, 2};
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (var[static_cast<std::size_t>(a)] != var[static_cast<std::size_t>(b)])
                return var[static_cast<std::size_t>(a)] > var[static_cast<std::size_t>(b)];
            return a < b;
        });
        // keep a stable left-right/up-down feel: x-ish axis horizontal
        ax = std::min(order[0], order[1]);
        ay = std::max(order[0], order[1]);
    }

    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (int j = 0; j < seq.num_joints; ++j) {
        lo_x = std::min(lo_x, seq.pos(frame, j)[ax]);
        hi_x = std::max(hi_x, seq.pos(frame, j)[ax]);
        lo_y = std::min(lo_y, seq.pos(frame, j)[ay]);
        hi_y = std::max(hi_y, seq.pos(frame, j)[ay]);
    }
    double span = std::max(std::max(hi_x - lo_x, hi_y - lo_y), 1e-9);
    const double size = 480.0, margin = 48.0;
    double s = (size - 2 * margin) / span;
    auto px = [&](int j) { return margin + (seq.pos(frame, j)[ax] - lo_x) * s + (size - 2 * margin - (hi_x - lo_x) * s) / 2; };
    auto py = [&](int j) { return size - margin - (seq.pos(frame, j)[ay] - lo_y) * s - (size - 2 * margin - (hi_y - lo_y) * s) / 2; };

    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << static_cast<int>(size)
        << "\" height=\"" << static_cast<int>(size) << "\" viewBox=\"0 0 " << static_cast<int>(size)
        << " " << static_cast<int>(size) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<g stroke=\"#607d8b\" stroke-width=\"3\">\n";
    for (int j = 0; j < seq.num_joints; ++j) {
        int p = topo.parent[static_cast<std::size_t>(j)];
        if (p == j) continue;
        out << "<line x1=\"" << px(p) << "\" y1=\"" << py(p) << "\" x2=\"" << px(j) << "\" y2=\""
            << py(j) << "\"/>\n";
    }
    out << "</g>\n";
    const double r_min = 3.5, r_max = 14.0;
    for (int j = 0; j < seq.num_joints; ++j) {
        double r = r_min + (r_max - r_min) * normalized[static_cast<std::size_t>(j)];
        bool is_top = std::find(top.begin(), top.end(), j) != top.end();
        bool is_ann = annotation && annotation->contains(j);
        out << "<circle id=\"joint-" << topo.joint_names[static_cast<std::size_t>(j)] << "\" cx=\""
            << px(j) << "\" cy=\"" << py(j) << "\" r=\"" << r << "\" fill=\""
            << (is_top ? "#e53935" : "#b0bec5") << "\"";
        if (is_ann) out << " stroke=\"#1b5e20\" stroke-width=\"2.5\"";
        out << "/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace exechecker
