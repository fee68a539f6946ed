#include "gsattack/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

namespace gsattack {

namespace {

void ensure_parent(const std::filesystem::path &path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};

void write_png_rows(const std::filesystem::path &path, int width, int height, int bit_depth,
                    int color_type, const std::vector<std::vector<png_byte>> &rows) {
    ensure_parent(path);
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto &row : rows) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void write_pfm(const Image &img, const std::filesystem::path &path) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw ShapeMismatch("PFM supports 1 or 3 channels");
    }
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n"
        << img.width() << " " << img.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                row[static_cast<std::size_t>(x) * img.channels() + c] =
                    static_cast<float>(img.at(x, y, c));
            }
        }
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
}

Image read_pfm(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    in.get();
    if ((magic != "PF" && magic != "Pf") || width <= 0 || height <= 0) {
        throw std::runtime_error("malformed PFM header in " + path.string());
    }
    if (scale > 0) throw std::runtime_error("big-endian PFM is not supported: " + path.string());
    const int channels = magic == "PF" ? 3 : 1;
    Image img(width, height, channels);
    std::vector<float> row(static_cast<std::size_t>(width) * channels);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated PFM " + path.string());
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c];
            }
        }
    }
    return img;
}

void write_png(const Image &rgb, const std::filesystem::path &path) {
    if (rgb.channels() != 3) throw ShapeMismatch("write_png expects an RGB image");
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(rgb.height()));
    for (int y = 0; y < rgb.height(); ++y) {
        auto &row = rows[static_cast<std::size_t>(y)];
        row.resize(static_cast<std::size_t>(rgb.width()) * 3);
        for (int x = 0; x < rgb.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(rgb.at(x, y, c), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
    }
    write_png_rows(path, rgb.width(), rgb.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_mask_png(const ROIMask &mask, const std::filesystem::path &path) {
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(mask.height));
    for (int y = 0; y < mask.height; ++y) {
        auto &row = rows[static_cast<std::size_t>(y)];
        row.assign(static_cast<std::size_t>((mask.width + 7) / 8), 0);
        for (int x = 0; x < mask.width; ++x) {
            if (mask.contains(x, y)) row[static_cast<std::size_t>(x / 8)] |= 0x80 >> (x % 8);
        }
    }
    write_png_rows(path, mask.width, mask.height, 1, PNG_COLOR_TYPE_GRAY, rows);
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace gsattack
