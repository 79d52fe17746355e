#include "mmagent/image.hpp"

#include "mmagent/errors.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <csetjmp>

#include <jpeglib.h>
#include <jerror.h>

namespace mmagent {

std::string sniff_media_type(const std::vector<uint8_t>& bytes) {
    static const uint8_t png_magic[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_magic, 8) == 0) return "image/png";
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return "image/jpeg";
    return "";
}

namespace {

struct PngReadState {
    const uint8_t* data;
    size_t size;
    size_t pos;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + len > st->size) {
        png_error(png, "read past end of buffer");
        return;
    }
    std::memcpy(out, st->data + st->pos, len);
    st->pos += len;
}

void png_mem_write(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void png_mem_flush(png_structp) {}

Image decode_png_bytes(const std::vector<uint8_t>& bytes) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(Errc::undecodable_image, "png allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(Errc::undecodable_image, "png allocation failed");
    }

    Image img;
    std::vector<png_bytep> rows;
    PngReadState state{bytes.data(), bytes.size(), 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::undecodable_image, "corrupt PNG payload");
    }

    png_set_read_fn(png, &state, png_mem_read);
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    // normalize everything to 8-bit RGB
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.pixels.resize(static_cast<size_t>(width) * height * 3);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.row(static_cast<int>(y));

    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(err->jump, 1);
}

Image decode_jpeg_bytes(const std::vector<uint8_t>& bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;

    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(Errc::undecodable_image, "corrupt JPEG payload");
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    Image img;
    img.width = static_cast<int>(cinfo.output_width);
    img.height = static_cast<int>(cinfo.output_height);
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);

    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.row(static_cast<int>(cinfo.output_scanline));
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

} // namespace

Image decode_image(const std::vector<uint8_t>& bytes) {
    std::string media = sniff_media_type(bytes);
    if (media == "image/png") return decode_png_bytes(bytes);
    if (media == "image/jpeg") return decode_jpeg_bytes(bytes);
    throw Error(Errc::undecodable_image, "payload is not a supported image format");
}

std::vector<uint8_t> encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0)
        throw Error(Errc::invalid_argument, "cannot encode empty image");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(Errc::io_error, "png allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(Errc::io_error, "png allocation failed");
    }

    std::vector<uint8_t> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io_error, "png encoding failed");
    }

    png_set_write_fn(png, &out, png_mem_write, png_mem_flush);
    // fixed settings keep the byte stream reproducible
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.row(y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image crop(const Image& img, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > img.width || y + h > img.height)
        throw Error(Errc::invalid_argument, "crop rectangle outside image");
    Image out;
    out.width = w;
    out.height = h;
    out.pixels.resize(static_cast<size_t>(w) * h * 3);
    for (int row = 0; row < h; ++row) {
        const uint8_t* src = img.row(y + row) + static_cast<size_t>(x) * 3;
        std::memcpy(out.row(row), src, static_cast<size_t>(w) * 3);
    }
    return out;
}

Image make_test_image(int width, int height, uint32_t rgb_seed) {
    Image img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y) {
        uint8_t* row = img.row(y);
        for (int x = 0; x < width; ++x) {
            // cheap position-dependent pattern so crops differ from each other
            row[x * 3 + 0] = static_cast<uint8_t>((x + rgb_seed) & 0xFF);
            row[x * 3 + 1] = static_cast<uint8_t>((y + (rgb_seed >> 8)) & 0xFF);
            row[x * 3 + 2] = static_cast<uint8_t>((x ^ y ^ (rgb_seed >> 16)) & 0xFF);
        }
    }
    return img;
}

} // namespace mmagent
