#include "image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "errors.hpp"

namespace sfv {

Image Image::from_pixels(Tensor pixels) {
    if (pixels.rank() != 3 || pixels.shape[0] != 3) {
        throw Error(ErrorCode::shape,
                    "image pixels must have shape 3xHxW, got " + shape_str(pixels.shape));
    }
    Image img;
    img.height = pixels.shape[1];
    img.width = pixels.shape[2];
    img.pixels = std::move(pixels);
    return img;
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) {
        throw Error(ErrorCode::format, "unexpected end of header in '" + path + "'");
    }
    return tok;
}

std::size_t parse_header_number(std::istream& in, const std::string& path,
                                const char* what) {
    const std::string tok = next_token(in, path);
    std::size_t value = 0;
    for (char ch : tok) {
        if (ch < '0' || ch > '9') {
            throw Error(ErrorCode::format,
                        std::string("invalid ") + what + " '" + tok + "' in '" + path + "'");
        }
        value = value * 10 + static_cast<std::size_t>(ch - '0');
    }
    return value;
}

unsigned char quantize(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open image '" + path + "'");
    }
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '6') {
        throw Error(ErrorCode::format, "bad magic in '" + path + "': expected P6 pixmap");
    }
    const std::size_t width = parse_header_number(in, path, "width");
    const std::size_t height = parse_header_number(in, path, "height");
    const std::size_t maxval = parse_header_number(in, path, "maxval");
    if (width == 0 || height == 0) {
        throw Error(ErrorCode::format, "zero image dimension in '" + path + "'");
    }
    if (maxval == 0 || maxval > 255) {
        throw Error(ErrorCode::format, "unsupported maxval " + std::to_string(maxval) + " in '" +
                                           path + "' (only 8-bit pixmaps are accepted)");
    }
    // The tokenizer consumed the single whitespace byte after maxval, so the
    // stream now sits on the first raster byte.
    std::vector<char> raster(width * height * 3);
    in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (static_cast<std::size_t>(in.gcount()) != raster.size()) {
        throw Error(ErrorCode::format, "truncated raster in '" + path + "': expected " +
                                           std::to_string(raster.size()) + " bytes, got " +
                                           std::to_string(in.gcount()));
    }

    Tensor pixels({3, height, width});
    const double scale = 1.0 / static_cast<double>(maxval);
    std::size_t p = 0;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                pixels.at3(c, y, x) =
                    static_cast<double>(static_cast<unsigned char>(raster[p++])) * scale;
            }
        }
    }
    return Image::from_pixels(std::move(pixels));
}

Image resize_bilinear(const Image& image, std::size_t target_w, std::size_t target_h) {
    if (target_w == 0 || target_h == 0) {
        throw Error(ErrorCode::invalid_argument, "resize target must be positive");
    }
    if (target_w == image.width && target_h == image.height) {
        return image;
    }
    Tensor out({3, target_h, target_w});
    const double sx = target_w > 1
                          ? static_cast<double>(image.width - 1) / static_cast<double>(target_w - 1)
                          : 0.0;
    const double sy = target_h > 1 ? static_cast<double>(image.height - 1) /
                                         static_cast<double>(target_h - 1)
                                   : 0.0;
    for (std::size_t y = 0; y < target_h; ++y) {
        const double gy = static_cast<double>(y) * sy;
        std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy),
                                               image.height > 1 ? image.height - 2 : 0);
        const std::size_t y1 = image.height > 1 ? y0 + 1 : y0;
        const double ty = gy - static_cast<double>(y0);
        for (std::size_t x = 0; x < target_w; ++x) {
            const double gx = static_cast<double>(x) * sx;
            std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx),
                                                   image.width > 1 ? image.width - 2 : 0);
            const std::size_t x1 = image.width > 1 ? x0 + 1 : x0;
            const double tx = gx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double f00 = image.pixels.at3(c, y0, x0);
                const double f01 = image.pixels.at3(c, y0, x1);
                const double f10 = image.pixels.at3(c, y1, x0);
                const double f11 = image.pixels.at3(c, y1, x1);
                out.at3(c, y, x) = (1.0 - ty) * ((1.0 - tx) * f00 + tx * f01) +
                                   ty * ((1.0 - tx) * f10 + tx * f11);
            }
        }
    }
    return Image::from_pixels(std::move(out));
}

Image load_image(const std::string& path, std::size_t target_size) {
    return resize_bilinear(load_ppm(path), target_size, target_size);
}

void save_ppm(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
    }
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<char> raster(image.width * image.height * 3);
    std::size_t p = 0;
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                raster[p++] = static_cast<char>(quantize(image.pixels.at3(c, y, x)));
            }
        }
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorCode::io, "write failed for '" + path + "'");
    }
}

void save_saliency_pgm(const Tensor& values, const std::string& path) {
    if (values.rank() != 2) {
        throw Error(ErrorCode::shape,
                    "saliency map must be rank 2, got " + shape_str(values.shape));
    }
    double max_abs = 0.0;
    for (double v : values.data) max_abs = std::max(max_abs, std::fabs(v));

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
    }
    out << "P5\n" << values.shape[1] << " " << values.shape[0] << "\n255\n";
    std::vector<char> raster(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = max_abs > 0.0 ? std::fabs(values.data[i]) / max_abs : 0.0;
        raster[i] = static_cast<char>(quantize(t));
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorCode::io, "write failed for '" + path + "'");
    }
}

void render_overlay(const Image& image, const Tensor& values, const std::string& path) {
    if (values.rank() != 2 || values.shape[0] != image.height ||
        values.shape[1] != image.width) {
        throw Error(ErrorCode::shape, "overlay map shape " + shape_str(values.shape) +
                                          " does not match image " + std::to_string(image.height) +
                                          "x" + std::to_string(image.width));
    }
    double max_abs = 0.0;
    for (double v : values.data) max_abs = std::max(max_abs, std::fabs(v));

    Image out;
    out.width = image.width;
    out.height = image.height;
    out.pixels = Tensor({3, image.height, image.width});
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            const double gray = (image.pixels.at3(0, y, x) + image.pixels.at3(1, y, x) +
                                 image.pixels.at3(2, y, x)) /
                                3.0;
            const double t =
                max_abs > 0.0 ? std::fabs(values.data[y * image.width + x]) / max_abs : 0.0;
            // Warm ramp from orange to red as intensity grows.
            const double warm_r = 1.0;
            const double warm_g = 0.6 * (1.0 - t);
            const double warm_b = 0.0;
            out.pixels.at3(0, y, x) = (1.0 - t) * gray + t * warm_r;
            out.pixels.at3(1, y, x) = (1.0 - t) * gray + t * warm_g;
            out.pixels.at3(2, y, x) = (1.0 - t) * gray + t * warm_b;
        }
    }
    save_ppm(out, path);
}

}  // namespace sfv
