#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kanlab {

/// Minimal SVG writer: enough rects, lines, circles and text for the report
/// plots, nothing more.
class SvgCanvas {
public:
    SvgCanvas(double width, double height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none") {
        body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
                 "\" height=\"" + num(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0) {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
                 "\" y2=\"" + num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
                 num(stroke_width) + "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& fill) {
        body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
                 "\" fill=\"" + fill + "\"/>\n";
    }

    void text(double x, double y, const std::string& content, double size = 11.0,
              const std::string& anchor = "start", const std::string& fill = "#222") {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
                 "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill +
                 "\">" + escape(content) + "</text>\n";
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("SvgCanvas: cannot write '" + path + "'");
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_)
            << "\" height=\"" << num(height_) << "\" viewBox=\"0 0 " << num(width_) << " "
            << num(height_) << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_ << "</svg>\n";
    }

    static std::string num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return buf;
    }

    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            switch (c) {
                case '&': out += "&amp;"; break;
                case '<': out += "&lt;"; break;
                case '>': out += "&gt;"; break;
                default: out.push_back(c);
            }
        }
        return out;
    }

private:
    double width_, height_;
    std::string body_;
};

/// Distinguishable fill colors, cycled by index.
inline const char* plot_color(std::size_t i) {
    static const char* palette[] = {"#4878a8", "#e0803c", "#5fa052", "#b85450",
                                    "#8767ab", "#d3a548", "#61aDB5", "#a85fa0"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace kanlab
