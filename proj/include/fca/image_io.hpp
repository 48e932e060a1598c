// image_io.hpp — binary PNM (PPM/PGM) read/write, 8-bit and 16-bit.
//
// PNM is the lossless interchange format for every image this pipeline
// writes: scene backgrounds and debug dumps use 8-bit, texture checkpoints
// 16-bit. 16-bit samples are big-endian per the PNM spec.
#pragma once

#include <string>

#include "fca/image.hpp"

namespace fca {

// Quantizes [0,1] doubles to the given bit depth. Values outside [0,1] clamp.
void write_pnm(const std::string& path, const Image& img, int bit_depth = 8);

// Reads P5 (1 channel) or P6 (3 channels), maxval 255 or 65535, back to [0,1].
Image read_pnm(const std::string& path);

// Header-only probe: returns (height, width, channels) without pixel data.
struct PnmHeader {
    int height = 0;
    int width = 0;
    int channels = 0;
    int maxval = 0;
};
PnmHeader read_pnm_header(const std::string& path);

void write_mask_pgm(const std::string& path, const BoolMask& mask);
BoolMask read_mask_pgm(const std::string& path);

}  // namespace fca
