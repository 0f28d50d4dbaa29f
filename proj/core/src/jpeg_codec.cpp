// SPDX-License-Identifier: Apache-2.0
#include "splatmark/jpeg_codec.hpp"

#include "splatmark/errors.hpp"

#include <cstdio>
#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <vector>

namespace splatmark {

namespace {

struct ErrorTrap {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
};

void error_exit(j_common_ptr info) {
    auto* trap = reinterpret_cast<ErrorTrap*>(info->err);
    std::longjmp(trap->jump, 1);
}

} // namespace

Image jpeg_roundtrip(const Image& image, int quality) {
    if (quality < 1 || quality > 100)
        throw ValidationError("jpeg_roundtrip: quality must be in [1, 100]");
    if (image.channels() != 3) throw ValidationError("jpeg_roundtrip: expected 3 channels");

    const int width = image.width();
    const int height = image.height();
    std::vector<unsigned char> rgb(static_cast<std::size_t>(width) * height * 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = image(y, x, c);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
                    static_cast<unsigned char>(v * 255.0 + 0.5);
            }

    ErrorTrap trap;
    unsigned char* encoded = nullptr;
    unsigned long encoded_size = 0;

    // Encode.
    {
        jpeg_compress_struct comp;
        comp.err = jpeg_std_error(&trap.mgr);
        trap.mgr.error_exit = error_exit;
        if (setjmp(trap.jump)) {
            jpeg_destroy_compress(&comp);
            if (encoded) free(encoded);
            throw NumericError("jpeg_roundtrip: encoder failed");
        }
        jpeg_create_compress(&comp);
        jpeg_mem_dest(&comp, &encoded, &encoded_size);
        comp.image_width = width;
        comp.image_height = height;
        comp.input_components = 3;
        comp.in_color_space = JCS_RGB;
        jpeg_set_defaults(&comp);
        jpeg_set_quality(&comp, quality, TRUE); // TRUE: force baseline tables
        jpeg_start_compress(&comp, TRUE);
        while (comp.next_scanline < comp.image_height) {
            JSAMPROW row = rgb.data() + static_cast<std::size_t>(comp.next_scanline) * width * 3;
            jpeg_write_scanlines(&comp, &row, 1);
        }
        jpeg_finish_compress(&comp);
        jpeg_destroy_compress(&comp);
    }

    // Decode.
    Image out(height, width, 3);
    {
        jpeg_decompress_struct decomp;
        decomp.err = jpeg_std_error(&trap.mgr);
        trap.mgr.error_exit = error_exit;
        if (setjmp(trap.jump)) {
            jpeg_destroy_decompress(&decomp);
            free(encoded);
            throw NumericError("jpeg_roundtrip: decoder failed");
        }
        jpeg_create_decompress(&decomp);
        jpeg_mem_src(&decomp, encoded, encoded_size);
        jpeg_read_header(&decomp, TRUE);
        decomp.out_color_space = JCS_RGB;
        jpeg_start_decompress(&decomp);
        std::vector<unsigned char> row(static_cast<std::size_t>(decomp.output_width) * 3);
        while (decomp.output_scanline < decomp.output_height) {
            const int y = static_cast<int>(decomp.output_scanline);
            JSAMPROW rows[1] = {row.data()};
            jpeg_read_scanlines(&decomp, rows, 1);
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < 3; ++c)
                    out(y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
        }
        jpeg_finish_decompress(&decomp);
        jpeg_destroy_decompress(&decomp);
    }
    free(encoded);
    return out;
}

std::string jpeg_codec_id() {
#ifdef LIBJPEG_TURBO_VERSION
#define SPLATMARK_STR2(x) #x
#define SPLATMARK_STR(x) SPLATMARK_STR2(x)
    return "libjpeg-turbo/" SPLATMARK_STR(LIBJPEG_TURBO_VERSION);
#undef SPLATMARK_STR
#undef SPLATMARK_STR2
#else
    return "libjpeg/" + std::to_string(JPEG_LIB_VERSION);
#endif
}

} // namespace splatmark
