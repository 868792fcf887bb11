// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#include "slimden/imageio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace slimden {

namespace {

// Next header token, skipping whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (!std::isspace(ch)) {
            tok.push_back(static_cast<char>(ch));
            break;
        }
    }
    while ((ch = in.get()) != EOF && !std::isspace(ch) && ch != '#') {
        tok.push_back(static_cast<char>(ch));
    }
    if (ch == '#') in.unget();
    return tok;
}

int parse_int(const std::string& tok, const char* what) {
    if (tok.empty()) throw DataError(std::string("pgm: missing ") + what);
    for (char c : tok) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw DataError(std::string("pgm: malformed ") + what + " '" + tok + "'");
        }
    }
    return std::stoi(tok);
}

}  // namespace

Tensor load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("pgm: cannot open '" + path + "'");
    if (next_token(in) != "P5") throw DataError("pgm: '" + path + "' is not binary PGM (P5)");
    const int w = parse_int(next_token(in), "width");
    const int h = parse_int(next_token(in), "height");
    const int maxval = parse_int(next_token(in), "maxval");
    if (w < 1 || h < 1) throw DataError("pgm: bad dimensions in '" + path + "'");
    if (maxval != 255) throw DataError("pgm: only maxval 255 is supported, got " + std::to_string(maxval));
    // header ends with exactly one whitespace byte, already consumed by the tokenizer

    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError("pgm: truncated payload in '" + path + "'");
    }

    Tensor img(1, 1, h, w);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        img.data[i] = static_cast<float>(raw[i]) / 255.0f;
    }
    return img;
}

void save_pgm(const std::string& path, const Tensor& image) {
    if (image.n != 1 || image.c != 1) {
        throw DataError("pgm: can only save single grayscale images, got " + image.shape_str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("pgm: cannot write '" + path + "'");
    out << "P5\n" << image.w << " " << image.h << "\n255\n";
    std::vector<unsigned char> raw(image.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float v = std::clamp(image.data[i], 0.0f, 1.0f);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("pgm: write failed for '" + path + "'");
}

}  // namespace slimden
