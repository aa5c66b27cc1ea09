// Benchmarks the OpenMP kernels against the serial reference implementations.
// The reference path is the oracle the tests use; this target shows what the
// parallel kernels buy on the same inputs.

#include <chrono>
#include <cstdio>
#include <string>

#include "dymapia/analyzers.hpp"
#include "dymapia/fft.hpp"
#include "dymapia/imgcore.hpp"
#include "dymapia/net.hpp"
#include "dymapia/parallel.hpp"
#include "dymapia/rng.hpp"
#include "ref/reference.hpp"

using namespace dymapia;
using clock_type = std::chrono::steady_clock;

namespace {

double ms_of(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count() / reps;
}

void row(const char* name, double parallel_ms, double serial_ms) {
    std::printf("%-28s %10.3f ms %12.3f ms %8.2fx\n", name, parallel_ms, serial_ms,
                serial_ms / parallel_ms);
}

GrayFrame random_frame(uint64_t seed, int n) {
    Rng rng(seed);
    GrayFrame f(n, n);
    for (double& v : f.data) v = rng.uniform();
    return f;
}

}  // namespace

int main(int argc, char** argv) {
    int jobs = 0;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--jobs") jobs = std::atoi(argv[i + 1]);
    if (jobs > 0) set_jobs(jobs);

    std::printf("jobs = %d\n", dymapia::jobs());
    std::printf("%-28s %13s %15s %9s\n", "kernel", "parallel", "serial ref", "speedup");

    {
        GrayFrame f = random_frame(1, 64);
        double par = ms_of([&] { fft2d(f); }, 20);
        double ser = ms_of([&] { ref::naive_dft2d(f.data, 64, 64); }, 2);
        row("dft 64x64 (fft vs naive)", par, ser);
    }
    {
        Rng rng(2);
        BinaryMask m(512, 512, 0);
        for (auto& b : m.bits) b = rng.uniform() < 0.4 ? 1 : 0;
        StructuringElement se(5);
        double par = ms_of([&] { erode(m, se); }, 10);
        double ser = ms_of([&] { ref::erode_brute(m, 5); }, 10);
        row("erode 512x512 se=5", par, ser);
    }
    {
        GrayFrame f = random_frame(3, 512);
        double par = ms_of([&] { lbp_codes(f); }, 10);
        double ser = ms_of(
            [&] {
                CodeMap out;
                out.height = f.height;
                out.width = f.width;
                out.codes.assign(f.size(), 0);
                for (int y = 1; y < f.height - 1; ++y)
                    for (int x = 1; x < f.width - 1; ++x)
                        out.codes[static_cast<size_t>(y) * f.width + x] = ref::lbp_code_at(f, y, x);
            },
            10);
        row("lbp codes 512x512", par, ser);
    }
    {
        GrayFrame a = random_frame(4, 128);
        GrayFrame b = random_frame(5, 128);
        AnalyzerConfig cfg;
        cfg.flow_iters = 50;
        double par = ms_of([&] { dense_flow(a, b, cfg); }, 3);
        double ser = ms_of([&] { ref::dense_flow_serial(a, b, cfg.flow_alpha, cfg.flow_iters); }, 3);
        row("horn-schunck 128x128 x50", par, ser);
    }
    {
        NetConfig cfg = NetConfig::lite_preset();
        cfg.input_side = 128;
        NetParams p = NetParams::init(cfg, 6);
        Rng rng(7);
        Tensor4 x(8, 1, 128, 128);
        for (double& v : x.data) v = rng.uniform();
        double par = ms_of([&] { forward(p, x, Mode::Eval); }, 5);
        double ser = ms_of(
            [&] {
                // the stem conv by definition, the dominant term at this size
                ref::conv2d_naive(x.data, 1, 128, 128, p.stem.weight, cfg.stem_channels, 3, 1,
                                  p.stem.bias);
            },
            5);
        std::printf("%-28s %10.3f ms   (stem-only serial conv: %.3f ms)\n",
                    "lite forward B=8 128x128", par, ser);
    }
    return 0;
}
