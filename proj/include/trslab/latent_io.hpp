#pragma once

// Latent dump format:
//   "TRSLAT1 N C H W dtype=f32 endian=LE\n" followed by N*C*H*W little-endian
//   float32 values, frame-major.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "trslab/tensor.hpp"

namespace trslab {

void write_latent(std::ostream& out, const VideoLatent& x);
void write_latent(const std::filesystem::path& path, const VideoLatent& x);
VideoLatent read_latent(std::istream& in);
VideoLatent read_latent(const std::filesystem::path& path);

/// One binary PGM (P5, 8-bit) per frame, named `<stem>_NNN.pgm`. Values are
/// min-max normalized over the whole video; only channel 0 is rendered.
void write_pgm_frames(const std::filesystem::path& dir, const std::string& stem, const VideoLatent& x);

/// Raw float32 little-endian payload, frame-major.
std::string to_f32_le(const FrameMatrix<double>& m);
FrameMatrix<double> from_f32_le(const std::string& bytes, Index rows, Index cols);

}  // namespace trslab
