#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "indt/core.hpp"

namespace indt {

// Binary PGM (P5, maxval 65535, big-endian samples). The image's min..max is
// mapped linearly onto 0..65535 and recorded in a comment line
// "# indt min=<v> max=<v>" so that readers can restore physical values.

inline void write_pgm(std::ostream& os, const GrayImage& image) {
    image.validate();
    const double lo = image.min_value();
    const double hi = image.max_value();
    const double range = hi - lo;
    char comment[128];
    std::snprintf(comment, sizeof comment, "# indt min=%.17g max=%.17g", lo, hi);
    os << "P5\n" << comment << "\n" << image.width() << ' ' << image.height() << "\n65535\n";
    std::vector<unsigned char> buf(image.size() * 2);
    std::size_t k = 0;
    for (double v : image.pixels()) {
        const double t = range > 0.0 ? (v - lo) / range : 0.0;
        const auto q = static_cast<unsigned>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        buf[k++] = static_cast<unsigned char>(q >> 8);
        buf[k++] = static_cast<unsigned char>(q & 0xFF);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeError("cannot open for writing: " + path.string());
    write_pgm(os, image);
    if (!os) throw RuntimeError("write failed: " + path.string());
}

namespace detail {

// Next whitespace-delimited header token, capturing comment lines.
inline std::string pgm_token(std::istream& is, std::vector<std::string>& comments) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            std::string line;
            std::getline(is, line);
            comments.push_back(line);
            if (!tok.empty()) return tok;
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

inline int pgm_int(const std::string& tok, const std::string& what) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) throw ValidationError("PGM: bad " + what + " '" + tok + "'");
    return v;
}

}  // namespace detail

/// Reads P5 PGM at 8 or 16 bits. If the indt comment is present the stored
/// range is restored, otherwise samples are scaled to [0,1].
inline GrayImage read_pgm(std::istream& is, const std::string& name = "<stream>") {
    std::vector<std::string> comments;
    if (detail::pgm_token(is, comments) != "P5") throw ValidationError("PGM: " + name + " is not a P5 file");
    const int w = detail::pgm_int(detail::pgm_token(is, comments), "width");
    const int h = detail::pgm_int(detail::pgm_token(is, comments), "height");
    const int maxval = detail::pgm_int(detail::pgm_token(is, comments), "maxval");
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw ValidationError("PGM: " + name + " has bad header");
    // exactly one whitespace byte follows maxval and was consumed by the tokenizer

    double lo = 0.0;
    double hi = 1.0;
    for (const std::string& c : comments) {
        double a = 0.0;
        double b = 0.0;
        if (std::sscanf(c.c_str(), " indt min=%lf max=%lf", &a, &b) == 2) {
            lo = a;
            hi = b;
        }
    }
    const int bytes = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<unsigned char> buf(n * static_cast<std::size_t>(bytes));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw ValidationError("PGM: " + name + " is truncated");
    std::vector<double> px(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned q = bytes == 2 ? (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1] : buf[i];
        px[i] = lo + (hi - lo) * (static_cast<double>(q) / maxval);
    }
    return GrayImage(w, h, std::move(px));
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw RuntimeError("cannot open for reading: " + path.string());
    return read_pgm(is, path.string());
}

}  // namespace indt
