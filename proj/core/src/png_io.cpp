// SPDX-License-Identifier: Apache-2.0
#include "splatmark/png_io.hpp"

#include "splatmark/errors.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace splatmark {

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* sink = static_cast<std::string*>(png_get_io_ptr(png));
    sink->append(reinterpret_cast<const char*>(data), length);
}

void flush_noop(png_structp) {}

struct MemoryReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t offset;
};

void read_bytes(png_structp png, png_bytep out, png_size_t length) {
    auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (reader->offset + length > reader->size)
        png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, reader->data + reader->offset, length);
    reader->offset += length;
}

} // namespace

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PNG: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw ValidationError("not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng allocation failed");

    MemoryReader reader{bytes.data(), bytes.size(), 0};
    std::vector<png_bytep> row_pointers;
    std::vector<unsigned char> raster;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ValidationError("corrupt PNG: " + path.string());
    }
    png_set_read_fn(png, &reader, read_bytes);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png); // little-endian samples below
    png_read_update_info(png, info);

    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raster.resize(stride * height);
    row_pointers.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) row_pointers[y] = raster.data() + y * stride;
    png_read_image(png, row_pointers.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image image(static_cast<int>(height), static_cast<int>(width), 3);
    if (out_depth == 8) {
        for (png_uint_32 y = 0; y < height; ++y)
            for (png_uint_32 x = 0; x < width; ++x)
                for (int c = 0; c < 3; ++c)
                    image(y, x, c) = raster[y * stride + 3 * x + c] / 255.0;
    } else if (out_depth == 16) {
        for (png_uint_32 y = 0; y < height; ++y) {
            const unsigned char* row = raster.data() + y * stride;
            for (png_uint_32 x = 0; x < width; ++x)
                for (int c = 0; c < 3; ++c) {
                    const std::size_t k = (3 * x + c) * 2;
                    const unsigned v = row[k] | (static_cast<unsigned>(row[k + 1]) << 8);
                    image(y, x, c) = v / 65535.0;
                }
        }
    } else {
        throw ValidationError("unsupported PNG bit depth in " + path.string());
    }
    return image;
}

void write_png(const Image& image, const std::filesystem::path& path, int bit_depth) {
    if (image.channels() != 3) throw ValidationError("write_png: expected 3 channels");
    if (bit_depth != 8 && bit_depth != 16)
        throw ValidationError("write_png: bit depth must be 8 or 16");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) throw IoError("libpng allocation failed");

    std::string encoded;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed for " + path.string());
    }
    png_set_write_fn(png, &encoded, append_bytes, flush_noop);
    png_set_IHDR(png, info, image.width(), image.height(), bit_depth, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const auto quantize = [&](double v, double scale) {
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return static_cast<unsigned>(v * scale + 0.5);
    };
    if (bit_depth == 8) {
        std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * 3);
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x)
                for (int c = 0; c < 3; ++c)
                    row[3 * x + c] = static_cast<unsigned char>(quantize(image(y, x, c), 255.0));
            png_write_row(png, row.data());
        }
    } else {
        std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * 6);
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x)
                for (int c = 0; c < 3; ++c) {
                    const unsigned v = quantize(image(y, x, c), 65535.0);
                    row[(3 * x + c) * 2] = static_cast<unsigned char>(v >> 8); // network order
                    row[(3 * x + c) * 2 + 1] = static_cast<unsigned char>(v & 0xff);
                }
            png_write_row(png, row.data());
        }
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    write_file_atomic(path, encoded);
}

std::string png_codec_id() { return std::string("libpng/") + PNG_LIBPNG_VER_STRING; }

} // namespace splatmark
