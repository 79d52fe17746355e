#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmagent {

// Decoded 8-bit RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels; // row-major, 3 bytes per pixel

    uint8_t* row(int y) { return pixels.data() + static_cast<size_t>(y) * width * 3; }
    const uint8_t* row(int y) const {
        return pixels.data() + static_cast<size_t>(y) * width * 3;
    }
};

// "image/png" or "image/jpeg" from magic bytes; empty if neither.
std::string sniff_media_type(const std::vector<uint8_t>& bytes);

// Throws Error(Errc::undecodable_image) on anything that is not a valid
// PNG or JPEG payload.
Image decode_image(const std::vector<uint8_t>& bytes);

// Deterministic PNG encoding (fixed filter/compression settings), so the
// same raster always yields the same bytes.
std::vector<uint8_t> encode_png(const Image& img);

// Crop rectangle must lie fully inside the source; callers validate bounds
// and produce their own error text.
Image crop(const Image& img, int x, int y, int w, int h);

Image make_test_image(int width, int height, uint32_t rgb_seed);

} // namespace mmagent
