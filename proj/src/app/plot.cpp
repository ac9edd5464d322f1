#include "duo/app/plot.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include "duo/error.h"
#include "duo/motion/kinematics.h"

namespace duo::app {

namespace {

constexpr double kPanel = 240.0;
constexpr double kPad = 12.0;
const char* kColorA = "#1f77b4";
const char* kColorB = "#d62728";

struct Box {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -std::numeric_limits<double>::infinity();
    double y0 = std::numeric_limits<double>::infinity(), y1 = -std::numeric_limits<double>::infinity();

    void add(double x, double y) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    double span() const { return std::max({x1 - x0, y1 - y0, 1e-6}); }
};

// Maps a box into a square of side `size` at (ox, oy), y pointing up.
struct View {
    Box box;
    double ox, oy, size;

    double px(double x) const { return ox + kPad + (x - box.x0) / box.span() * (size - 2 * kPad); }
    double py(double y) const { return oy + size - kPad - (y - box.y0) / box.span() * (size - 2 * kPad); }
};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& s) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << s;
}

}  // namespace

void write_motion_svg(const std::filesystem::path& path, const motion::Dataset& data,
                      const motion::SkeletonSpec& skeleton, int max_pairs) {
    const int n = std::min<int>(max_pairs, static_cast<int>(data.size()));
    const int cols = std::max(1, std::min(n, 4));
    const int rows = (n + cols - 1) / cols;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * 2 * kPanel << "\" height=\""
        << std::max(1, rows) * (kPanel + 20) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int i = 0; i < n; ++i) {
        const auto& pair = data[static_cast<std::size_t>(i)];
        const double ox = (i % cols) * 2 * kPanel;
        const double oy = (i / cols) * (kPanel + 20) + 20;
        svg << "<text x=\"" << ox + 4 << "\" y=\"" << oy - 6 << "\" font-size=\"11\" font-family=\"sans-serif\">"
            << escape(pair.text.substr(0, 60)) << "</text>\n";
        const auto pa = motion::joint_positions(pair.person_a, skeleton);
        const auto pb = motion::joint_positions(pair.person_b, skeleton);

        View top{{}, ox, oy, kPanel};
        for (const auto* p : {&pa, &pb})
            for (Eigen::Index f = 0; f < p->rows(); ++f) top.box.add((*p)(f, 0), (*p)(f, 2));
        svg << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << kPanel << "\" height=\"" << kPanel
            << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
        for (auto [p, color] : {std::pair{&pa, kColorA}, std::pair{&pb, kColorB}}) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (Eigen::Index f = 0; f < p->rows(); ++f) svg << top.px((*p)(f, 0)) << "," << top.py((*p)(f, 2)) << " ";
            svg << "\"/>\n";
        }

        const Eigen::Index mid = pa.rows() / 2;
        View front{{}, ox + kPanel, oy, kPanel};
        for (const auto* p : {&pa, &pb})
            for (int j = 0; j < skeleton.joint_count(); ++j) front.box.add((*p)(mid, 3 * j), (*p)(mid, 3 * j + 1));
        svg << "<rect x=\"" << ox + kPanel << "\" y=\"" << oy << "\" width=\"" << kPanel << "\" height=\"" << kPanel
            << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
        for (auto [p, color] : {std::pair{&pa, kColorA}, std::pair{&pb, kColorB}}) {
            for (int j = 1; j < skeleton.joint_count(); ++j) {
                const int q = skeleton.parents[static_cast<std::size_t>(j)];
                svg << "<line x1=\"" << front.px((*p)(mid, 3 * q)) << "\" y1=\"" << front.py((*p)(mid, 3 * q + 1))
                    << "\" x2=\"" << front.px((*p)(mid, 3 * j)) << "\" y2=\"" << front.py((*p)(mid, 3 * j + 1))
                    << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
            }
        }
    }
    svg << "</svg>\n";
    write_text(path, svg.str());
}

void write_sweep_svg(const std::filesystem::path& path, const Series& series, const std::string& x_label) {
    const double w = 360, h = 200;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << std::max<std::size_t>(1, series.size()) * (h + 30) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    int row = 0;
    for (const auto& [name, pts] : series) {
        const double oy = row * (h + 30) + 20;
        Box box;
        for (const auto& [x, y] : pts) box.add(x, y);
        const double xs = std::max(box.x1 - box.x0, 1e-9), ys = std::max(box.y1 - box.y0, 1e-9);
        auto px = [&](double x) { return 50 + (x - box.x0) / xs * (w - 70); };
        auto py = [&](double y) { return oy + h - 25 - (y - box.y0) / ys * (h - 45); };
        svg << "<g class=\"chart\" data-metric=\"" << escape(name) << "\">\n";
        svg << "<text x=\"50\" y=\"" << oy << "\" font-size=\"12\" font-family=\"sans-serif\">" << escape(name)
            << " vs " << escape(x_label) << "</text>\n";
        svg << "<line x1=\"50\" y1=\"" << oy + h - 25 << "\" x2=\"" << w - 20 << "\" y2=\"" << oy + h - 25
            << "\" stroke=\"black\"/>\n<line x1=\"50\" y1=\"" << oy + 20 << "\" x2=\"50\" y2=\"" << oy + h - 25
            << "\" stroke=\"black\"/>\n";
        svg << "<polyline fill=\"none\" stroke=\"" << kColorA << "\" points=\"";
        for (const auto& [x, y] : pts) svg << px(x) << "," << py(y) << " ";
        svg << "\"/>\n";
        for (const auto& [x, y] : pts) {
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << kColorA << "\"><title>"
                << x << ", " << y << "</title></circle>\n";
        }
        svg << "</g>\n";
        ++row;
    }
    svg << "</svg>\n";
    write_text(path, svg.str());
}

std::map<std::string, int> count_sweep_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::map<std::string, int> counts;
    std::string line, current;
    const std::regex chart("data-metric=\"([^\"]*)\"");
    std::smatch m;
    while (std::getline(in, line)) {
        if (std::regex_search(line, m, chart)) current = m[1];
        if (line.rfind("<circle", 0) == 0 && !current.empty()) ++counts[current];
    }
    return counts;
}

}  // namespace duo::app
