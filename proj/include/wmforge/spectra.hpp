#pragma once

#include "wmforge/image.hpp"
#include "wmforge/rng.hpp"

#include <string>
#include <vector>

namespace wmforge {

// Amplitude spectrum on a centered frequency grid: row r holds frequency
// i = r - h/2, column c holds j = c - w/2, so DC sits at (h/2, w/2).
struct Spectrum {
    int h = 0, w = 0;
    std::vector<double> amp;

    Spectrum() = default;
    Spectrum(int h_, int w_) : h(h_), w(w_), amp(std::size_t(h_) * w_, 0.0) {}

    double& at(int r, int c) { return amp[std::size_t(r) * w + c]; }
    double at(int r, int c) const { return amp[std::size_t(r) * w + c]; }

    // set amplitude 1 at centered frequency (i, j), clipped to the grid
    void mark(int i, int j);
};

enum class ArtifactStyle { Wave, Noise, Line };

ArtifactStyle artifact_style_from(const std::string& name);
std::string to_string(ArtifactStyle s);

struct ArtifactParams {
    ArtifactStyle style = ArtifactStyle::Wave;
    bool gray = false;     // one spectrum shared by all channels
    bool jnd_mask = false; // modulate the residual by jnd_map(x)
};

// Drawn per pair during training: style uniform over the three families,
// gray and jnd_mask fair coins.
ArtifactParams draw_artifact_params(Rng& rng);

Spectrum gen_wave(int h, int w, Rng& rng);
Spectrum gen_noise(int h, int w, Rng& rng);
Spectrum gen_line(int h, int w, Rng& rng);
Spectrum gen_artifact(ArtifactStyle style, int h, int w, Rng& rng);

// Random phases, conjugate symmetrization, inverse transform, rescale to
// max|value| = 0.05. Returns a single signed plane (h*w). Non power-of-two
// grids are padded up for the transform and cropped back.
// The imaginary residue of the inverse transform is checked against 1e-5;
// if imag_residue is non-null the observed value is written there.
std::vector<float> synthesize(const Spectrum& spec, Rng& rng, double* imag_residue = nullptr);

// Sobel luminance gradients scaled by their own 95th percentile, clamped
// to [0,1], then box-blurred 3x3. Stand-in for the JND map.
std::vector<float> jnd_map(const Image& x);

struct ArtifactResult {
    Image corrupted; // x + omega, clamped
    Image omega;     // signed residual, same shape as x
};

ArtifactResult apply_artifact(const Image& x, const ArtifactParams& params, Rng& rng);

} // namespace wmforge
