#include "psae/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace psae {

void write_pgm(const std::filesystem::path& path, const Image& img) {
    if (img.h <= 0 || img.w <= 0) throw Error(concat("write_pgm: empty image for ", path.string()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(concat("cannot write ", path.string()));
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.w));
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const float v = std::clamp(img.at(y, x), 0.0f, 1.0f);
            row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        out.write(reinterpret_cast<const char*>(row.data()), img.w);
    }
    if (!out) throw Error(concat("write failed: ", path.string()));
}

namespace {

// Reads the next header token, skipping whitespace and # comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok += static_cast<char>(c);
    }
    if (tok.empty()) throw Error(concat("truncated image header: ", path.string()));
    return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(concat("cannot open ", path.string()));
    if (next_token(in, path) != "P5")
        throw Error(concat("not a binary graymap (P5): ", path.string()));
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in, path));
        h = std::stoi(next_token(in, path));
        maxval = std::stoi(next_token(in, path));
    } catch (const std::exception&) {
        throw Error(concat("bad image header: ", path.string()));
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw Error(concat("unsupported image geometry in ", path.string()));
    // header tokens end with exactly one whitespace byte, already consumed by
    // next_token reading past the token — the stream now sits on pixel data
    Image img(h, w);
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw Error(concat("truncated pixel data: ", path.string()));
    const float scale = 1.0f / static_cast<float>(maxval);
    for (size_t i = 0; i < buf.size(); ++i) img.px[i] = static_cast<float>(buf[i]) * scale;
    return img;
}

Image resize_bilinear(const Image& src, int oh, int ow) {
    if (src.h <= 0 || src.w <= 0) throw Error("resize_bilinear: empty source");
    if (oh <= 0 || ow <= 0) throw Error("resize_bilinear: empty target");
    Image out(oh, ow);
    const float sy = oh > 1 ? static_cast<float>(src.h - 1) / (oh - 1) : 0.0f;
    const float sx = ow > 1 ? static_cast<float>(src.w - 1) / (ow - 1) : 0.0f;
    for (int y = 0; y < oh; ++y) {
        const float fy = y * sy;
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const float ty = fy - y0;
        for (int x = 0; x < ow; ++x) {
            const float fx = x * sx;
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const float tx = fx - x0;
            const float top = src.at(y0, x0) * (1 - tx) + src.at(y0, x1) * tx;
            const float bot = src.at(y1, x0) * (1 - tx) + src.at(y1, x1) * tx;
            out.at(y, x) = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

}  // namespace psae
