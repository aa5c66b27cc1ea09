#include "dymapia/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dymapia/imageio.hpp"
#include "dymapia/imgcore.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dymapia {

namespace {

bool parse_frame_index(const std::string& stem, int& index) {
    if (stem.empty() || stem.size() > 9) return false;
    for (char c : stem)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    index = std::stoi(stem);
    return true;
}

bool is_frame_ext(const std::string& ext) {
    return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

// Finds the numbered file for index t in a directory, any zero padding.
std::string find_numbered_file(const std::string& dir, int t) {
    if (!fs::is_directory(dir)) throw io_error("not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (!is_frame_ext(ext)) continue;
        int idx;
        if (parse_frame_index(entry.path().stem().string(), idx) && idx == t)
            return entry.path().string();
    }
    return {};
}

double bilinear_sample(const GrayFrame& f, double y, double x) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    double acc = 0.0;
    for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
            const int yy = y0 + dy, xx = x0 + dx;
            if (yy < 0 || yy >= f.height || xx < 0 || xx >= f.width) continue;  // out-of-source = 0
            const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
            acc += wgt * f.at(yy, xx);
        }
    }
    return acc;
}

Landmarks parse_landmarks(const json& j) {
    auto pt = [&](const char* name) -> Point2 {
        if (!j.contains(name)) throw invalid_input(std::string("annotations: missing landmark ") + name);
        const auto& a = j.at(name);
        return {a.at(0).get<double>(), a.at(1).get<double>()};
    };
    Landmarks lm;
    lm.left_eye = pt("left_eye");
    lm.right_eye = pt("right_eye");
    lm.nose = pt("nose");
    lm.mouth_left = pt("mouth_left");
    lm.mouth_right = pt("mouth_right");
    if (!(lm.left_eye.x < lm.right_eye.x))
        throw invalid_input("annotations: left_eye.x must be < right_eye.x");
    return lm;
}

}  // namespace

std::map<int, FrameAnnotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open annotations: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw io_error("annotations parse error in " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw invalid_input("annotations: expected a JSON array: " + path);
    std::map<int, FrameAnnotation> out;
    for (const auto& rec : doc) {
        int t = rec.at("t").get<int>();
        FrameAnnotation a;
        if (rec.contains("box")) {
            const auto& b = rec.at("box");
            a.box = Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        }
        if (rec.contains("landmarks")) a.landmarks = parse_landmarks(rec.at("landmarks"));
        out[t] = a;
    }
    return out;
}

SegmentationSource SegmentationSource::external(std::string dir) {
    SegmentationSource s;
    s.mode = Mode::ExternalMask;
    s.mask_dir = std::move(dir);
    return s;
}

SegmentationSource SegmentationSource::from_boxes(std::map<int, Rect> boxes) {
    SegmentationSource s;
    s.mode = Mode::BoundingBox;
    s.boxes = std::move(boxes);
    return s;
}

FrameSequence load_sequence(const std::string& dir_path) {
    if (!fs::is_directory(dir_path)) throw io_error("not a directory: " + dir_path);
    std::map<int, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir_path)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (!is_frame_ext(ext)) continue;
        int idx;
        if (!parse_frame_index(entry.path().stem().string(), idx)) continue;
        auto [it, inserted] = files.emplace(idx, entry.path().string());
        if (!inserted)
            throw invalid_input("duplicate frame index " + std::to_string(idx) + " in " + dir_path);
    }
    if (files.empty()) throw io_error("no numbered frames found in " + dir_path);

    // Indices must be contiguous from 0.
    std::string missing;
    int expect = 0;
    for (const auto& [idx, path] : files) {
        while (expect < idx) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(expect++);
        }
        ++expect;
    }
    if (files.begin()->first != 0 || !missing.empty()) {
        if (files.begin()->first != 0 && missing.empty()) missing = "0.." + std::to_string(files.begin()->first - 1);
        throw invalid_input("frame gap in " + dir_path + ": missing t = " + missing);
    }

    FrameSequence seq;
    seq.frames.reserve(files.size());
    for (const auto& [idx, path] : files) {
        ImageU8 img = read_image(path);
        if (img.height < 16 || img.width < 16)
            throw invalid_input("frame too small (min 16x16): " + path);
        seq.frames.push_back(to_gray_frame(img, idx));
    }
    seq.validate();
    return seq;
}

BinaryMask segment_face(const GrayFrame& frame, const SegmentationSource& src) {
    switch (src.mode) {
        case SegmentationSource::Mode::HeuristicEllipse: {
            BinaryMask mask(frame.height, frame.width, 0);
            const double cy = (frame.height - 1) / 2.0, cx = (frame.width - 1) / 2.0;
            const double a = 0.30 * frame.width, b = 0.40 * frame.height;
            for (int y = 0; y < frame.height; ++y) {
                for (int x = 0; x < frame.width; ++x) {
                    const double dx = (x - cx) / a, dy = (y - cy) / b;
                    mask.at(y, x) = (dx * dx + dy * dy <= 1.0) ? 1 : 0;
                }
            }
            return mask;
        }
        case SegmentationSource::Mode::BoundingBox: {
            auto it = src.boxes.find(frame.t);
            if (it == src.boxes.end())
                throw invalid_input("no bounding box for frame t=" + std::to_string(frame.t));
            const Rect& r = it->second;
            BinaryMask mask(frame.height, frame.width, 0);
            for (int y = std::max(0, r.y); y < std::min(frame.height, r.y + r.h); ++y)
                for (int x = std::max(0, r.x); x < std::min(frame.width, r.x + r.w); ++x)
                    mask.at(y, x) = 1;
            return mask;
        }
        case SegmentationSource::Mode::ExternalMask: {
            std::string path = find_numbered_file(src.mask_dir, frame.t);
            if (path.empty())
                throw invalid_input("external mask missing for frame t=" + std::to_string(frame.t) +
                                    " in " + src.mask_dir);
            BinaryMask mask = image_to_mask(read_image(path));
            if (!mask.same_shape(frame))
                throw invalid_input("external mask dimensions mismatch for frame t=" +
                                    std::to_string(frame.t));
            return mask;
        }
    }
    throw invalid_input("segment_face: unknown mode");
}

GrayFrame align(const GrayFrame& frame, const Landmarks& lm, int out_size) {
    using cd = std::complex<double>;
    const cd p1(lm.left_eye.x, lm.left_eye.y), p2(lm.right_eye.x, lm.right_eye.y);
    const cd dp = p2 - p1;
    if (std::abs(dp) < 2.0) return align_center_crop(frame, out_size);

    const double s = static_cast<double>(out_size);
    const cd q1(0.35 * s, 0.40 * s), q2(0.65 * s, 0.40 * s);
    const cd m = (q2 - q1) / dp;
    const cd t = q1 - m * p1;

    GrayFrame out(out_size, out_size, 0.0, frame.t);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out_size; ++y) {
        for (int x = 0; x < out_size; ++x) {
            const cd src = (cd(x, y) - t) / m;
            out.at(y, x) = bilinear_sample(frame, src.imag(), src.real());
        }
    }
    return out;
}

GrayFrame align_center_crop(const GrayFrame& frame, int out_size) {
    const int side = std::min(frame.height, frame.width);
    const int y0 = (frame.height - side) / 2;
    const int x0 = (frame.width - side) / 2;
    GrayFrame crop(side, side, 0.0, frame.t);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            crop.at(y, x) = frame.at(y0 + y, x0 + x);
    return resize_bilinear(crop, out_size, out_size);
}

GrayFrame normalize(const GrayFrame& frame) {
    const size_t n = frame.size();
    double mean = 0.0;
    for (double v : frame.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : frame.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sigma = std::sqrt(var);

    GrayFrame out(frame.height, frame.width, 0.5, frame.t);
    if (sigma < 1e-12 * std::max(1.0, std::abs(mean))) return out;  // constant frame

    double zmin = 3.0, zmax = -3.0;
    std::vector<double> z(n);
    for (size_t i = 0; i < n; ++i) {
        z[i] = std::clamp((frame.data[i] - mean) / sigma, -3.0, 3.0);
        zmin = std::min(zmin, z[i]);
        zmax = std::max(zmax, z[i]);
    }
    if (zmax - zmin < 1e-12) return out;
    const double scale = 1.0 / (zmax - zmin);
    for (size_t i = 0; i < n; ++i) out.data[i] = (z[i] - zmin) * scale;
    return out;
}

GrayFrame resize_bilinear(const GrayFrame& frame, int out_h, int out_w) {
    if (out_h == frame.height && out_w == frame.width) return frame;
    GrayFrame out(out_h, out_w, 0.0, frame.t);
    const double sy = static_cast<double>(frame.height) / out_h;
    const double sx = static_cast<double>(frame.width) / out_w;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out_h; ++y) {
        const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, frame.height - 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, frame.width - 1.0);
            out.at(y, x) = bilinear_sample(frame, src_y, src_x);
        }
    }
    return out;
}

GrayFrame preprocess_frame(const GrayFrame& frame, const SegmentationSource& src,
                           const std::optional<Landmarks>& lm, int out_size) {
    const BinaryMask face = segment_face(frame, src);
    const GrayFrame masked = mask_apply(frame, face);
    const GrayFrame aligned = lm ? align(masked, *lm, out_size) : align_center_crop(masked, out_size);
    return normalize(aligned);
}

}  // namespace dymapia
