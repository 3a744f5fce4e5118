#include "osb/image.hpp"

#include <fstream>
#include <stdexcept>

#include "osb/errors.hpp"

namespace osb {

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
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

int parse_dim(const std::string& tok, const std::string& path) {
    try {
        const int v = std::stoi(tok);
        if (v < 1) throw std::out_of_range("non-positive");
        return v;
    } catch (const std::exception&) {
        throw ParseError(path + ": bad PPM header field '" + tok + "'");
    }
}

}  // namespace

RgbImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open image file: " + path);

    if (next_token(in) != "P6")
        throw ParseError(path + ": not a binary PPM (P6) file");
    const int width = parse_dim(next_token(in), path);
    const int height = parse_dim(next_token(in), path);
    const int maxval = parse_dim(next_token(in), path);
    if (maxval != 255)
        throw ParseError(path + ": only maxval 255 PPM files are supported");

    RgbImage img(height, width);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw ParseError(path + ": truncated PPM pixel data");
    return img;
}

void write_ppm(const std::string& path, const RgbImage& image) {
    if (image.empty()) throw std::invalid_argument("write_ppm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write image file: " + path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw FileError("failed writing image file: " + path);
}

Tensor image_to_tensor(const RgbImage& image) {
    if (image.empty()) throw std::invalid_argument("image_to_tensor: empty image");
    Tensor t({image.height, image.width, 3});
    for (std::size_t i = 0; i < image.data.size(); ++i)
        t.data[i] = static_cast<float>(image.data[i]);
    return t;
}

RgbImage crop_image(const RgbImage& image, int x0, int y0, int w, int h) {
    if (w < 1 || h < 1) throw std::invalid_argument("crop_image: empty rectangle");
    if (x0 < 0 || y0 < 0 || x0 + w > image.width || y0 + h > image.height)
        throw std::invalid_argument("crop_image: rectangle outside image");
    RgbImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y0 + y, x0 + x, c);
    return out;
}

}  // namespace osb
