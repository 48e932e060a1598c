#include "fca/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fca/errors.hpp"

namespace fca {

namespace {

int quantize(double v, int maxval) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return maxval;
    return static_cast<int>(std::lround(v * maxval));
}

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
    for (;;) {
        int c = in.peek();
        if (c == EOF) throw IoError("truncated PNM header: " + path);
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw IoError("bad PNM header token: " + path);
    return value;
}

PnmHeader parse_header(std::istream& in, const std::string& path) {
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw IoError("not a binary PGM/PPM file: " + path);
    PnmHeader h;
    h.channels = (kind == '6') ? 3 : 1;
    h.width = next_header_int(in, path);
    h.height = next_header_int(in, path);
    h.maxval = next_header_int(in, path);
    if (h.width <= 0 || h.height <= 0)
        throw IoError("bad PNM dimensions: " + path);
    if (h.maxval != 255 && h.maxval != 65535)
        throw IoError("unsupported PNM maxval: " + path);
    in.get();  // single whitespace before raster
    return h;
}

}  // namespace

void write_pnm(const std::string& path, const Image& img, int bit_depth) {
    if (img.channels != 1 && img.channels != 3)
        throw ArgumentError("write_pnm: image must have 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16)
        throw ArgumentError("write_pnm: bit depth must be 8 or 16");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    const int maxval = bit_depth == 8 ? 255 : 65535;
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n"
        << maxval << "\n";

    std::string raster;
    raster.reserve(img.size() * (bit_depth / 8));
    for (double v : img.data) {
        int q = quantize(v, maxval);
        if (bit_depth == 16) raster.push_back(static_cast<char>((q >> 8) & 0xFF));
        raster.push_back(static_cast<char>(q & 0xFF));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw IoError("write failed: " + path);
}

Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    PnmHeader h = parse_header(in, path);

    Image img(h.height, h.width, h.channels);
    const size_t n = img.size();
    const int bytes = h.maxval == 255 ? 1 : 2;
    std::vector<char> raster(n * bytes);
    in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (static_cast<size_t>(in.gcount()) != raster.size())
        throw IoError("truncated PNM raster: " + path);

    const double inv = 1.0 / h.maxval;
    for (size_t i = 0; i < n; ++i) {
        int q;
        if (bytes == 1) {
            q = static_cast<uint8_t>(raster[i]);
        } else {
            q = (static_cast<uint8_t>(raster[2 * i]) << 8) |
                static_cast<uint8_t>(raster[2 * i + 1]);
        }
        img.data[i] = q * inv;
    }
    return img;
}

PnmHeader read_pnm_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return parse_header(in, path);
}

void write_mask_pgm(const std::string& path, const BoolMask& mask) {
    Image img(mask.height, mask.width, 1);
    for (size_t i = 0; i < mask.data.size(); ++i)
        img.data[i] = mask.data[i] ? 1.0 : 0.0;
    write_pnm(path, img, 8);
}

BoolMask read_mask_pgm(const std::string& path) {
    Image img = read_pnm(path);
    if (img.channels != 1)
        throw IoError("mask file must be single-channel: " + path);
    BoolMask mask(img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i)
        mask.data[i] = img.data[i] >= 0.5 ? 1 : 0;
    return mask;
}

}  // namespace fca
