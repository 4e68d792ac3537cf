#pragma once

// Client side of the external denoiser protocol. One JSON object per line:
//   request  {"id","op","sigma","cond_role","shape":[N,C,H,W],"data","cond_data"}
//   response {"id","status","x0_uncond","x0_cond","error"}
// Payloads are base64 little-endian float32, frame-major.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "trslab/denoiser.hpp"

namespace trslab {

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

struct BridgeRequest {
  std::uint64_t id = 0;
  std::string op = "denoise";  // denoise | ping | shutdown
  double sigma = 0.0;
  FrameRole cond_role = FrameRole::kNone;
  Index frames = 0;
  FrameShape shape;
  std::string data;       // base64
  std::string cond_data;  // base64, empty when absent
};

struct BridgeResponse {
  std::uint64_t id = 0;
  std::string status;  // ok | error
  std::string x0_uncond;
  std::string x0_cond;
  std::string error;
};

FrameRole parse_frame_role(const std::string& text);

std::string encode_request(const BridgeRequest& req);
BridgeRequest decode_request(const std::string& line);
std::string encode_response(const BridgeResponse& resp);
BridgeResponse decode_response(const std::string& line);

BridgeRequest make_denoise_request(std::uint64_t id, const VideoLatent& x_t, double sigma, const FrameCondition& cond);
/// Evaluates a request against an in-process denoiser; the reference
/// behaviour any backend must reproduce.
BridgeResponse serve_request(const BridgeRequest& req, const Denoiser& denoiser);

/// Blocking line exchange with a backend.
class BridgeTransport {
 public:
  virtual ~BridgeTransport() = default;
  virtual std::string exchange(const std::string& line) = 0;
};

/// "host:port". Connects lazily on first use.
std::unique_ptr<BridgeTransport> make_tcp_transport(const std::string& endpoint);
/// Spawns `/bin/sh -c command` and talks over its standard streams.
std::unique_ptr<BridgeTransport> make_stdio_transport(const std::string& command);

/// Denoiser whose estimates come from a backend. Calls are serialized; the
/// float32 transport limits agreement with in-process runs to ~1e-6 relative.
class BridgeDenoiser final : public Denoiser {
 public:
  explicit BridgeDenoiser(std::unique_ptr<BridgeTransport> transport);
  DenoisedPair denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const override;
  void ping() const;
  void shutdown() const;

 private:
  BridgeResponse call(BridgeRequest req) const;

  std::unique_ptr<BridgeTransport> transport_;
  mutable std::mutex mutex_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace trslab
