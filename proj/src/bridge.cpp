#include "trslab/bridge.hpp"

#include <csignal>
#include <cstring>

#include <netdb.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>
#include <openssl/evp.h>

#include "trslab/latent_io.hpp"

namespace trslab {

std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(const std::string& text) {
  require(text.size() % 4 == 0, "base64: length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  require(n >= 0, "base64: invalid character");
  std::size_t pad = 0;
  if (text[text.size() - 1] == '=') ++pad;
  if (text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

FrameRole parse_frame_role(const std::string& text) {
  if (text == "none") return FrameRole::kNone;
  if (text == "start") return FrameRole::kStart;
  if (text == "end") return FrameRole::kEnd;
  throw Error(ErrorCode::kInvalidInput, "unknown cond_role '" + text + "'");
}

std::string encode_request(const BridgeRequest& req) {
  nlohmann::ordered_json j;
  j["id"] = req.id;
  j["op"] = req.op;
  if (req.op == "denoise") {
    j["sigma"] = req.sigma;
    j["cond_role"] = to_string(req.cond_role);
    j["shape"] = {req.frames, req.shape.channels, req.shape.height, req.shape.width};
    j["data"] = req.data;
    if (!req.cond_data.empty()) j["cond_data"] = req.cond_data;
  }
  return j.dump();
}

BridgeRequest decode_request(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("malformed request: ") + e.what());
  }
  require(j.is_object(), "request is not an object");
  BridgeRequest req;
  try {
    require(j.at("id").is_number_unsigned(), "id must be a non-negative integer");
    req.id = j.at("id").get<std::uint64_t>();
    req.op = j.at("op").get<std::string>();
    if (req.op == "ping" || req.op == "shutdown") return req;
    require(req.op == "denoise", "unknown op '" + req.op + "'");
    req.sigma = j.at("sigma").get<double>();
    req.cond_role = parse_frame_role(j.at("cond_role").get<std::string>());
    const auto shape = j.at("shape").get<std::vector<long long>>();
    require(shape.size() == 4, "shape must be [N, C, H, W]");
    for (long long d : shape) require(d > 0, "shape entries must be positive");
    req.frames = shape[0];
    req.shape = {shape[1], shape[2], shape[3]};
    req.data = j.at("data").get<std::string>();
    if (j.contains("cond_data")) req.cond_data = j["cond_data"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("malformed request: ") + e.what());
  }
  return req;
}

std::string encode_response(const BridgeResponse& resp) {
  nlohmann::ordered_json j;
  j["id"] = resp.id;
  j["status"] = resp.status;
  if (!resp.x0_uncond.empty()) j["x0_uncond"] = resp.x0_uncond;
  if (!resp.x0_cond.empty()) j["x0_cond"] = resp.x0_cond;
  if (!resp.error.empty()) j["error"] = resp.error;
  return j.dump();
}

BridgeResponse decode_response(const std::string& line) {
  BridgeResponse resp;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    resp.id = j.at("id").get<std::uint64_t>();
    resp.status = j.at("status").get<std::string>();
    if (j.contains("x0_uncond")) resp.x0_uncond = j["x0_uncond"].get<std::string>();
    if (j.contains("x0_cond")) resp.x0_cond = j["x0_cond"].get<std::string>();
    if (j.contains("error")) resp.error = j["error"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBackendUnavailable, std::string("malformed response: ") + e.what());
  }
  return resp;
}

BridgeRequest make_denoise_request(std::uint64_t id, const VideoLatent& x_t, double sigma, const FrameCondition& cond) {
  BridgeRequest req;
  req.id = id;
  req.sigma = sigma;
  req.cond_role = cond.role;
  req.frames = x_t.frame_count();
  req.shape = x_t.shape();
  req.data = base64_encode(to_f32_le(x_t.frames()));
  if (cond.role != FrameRole::kNone) req.cond_data = base64_encode(to_f32_le(cond.latent));
  return req;
}

BridgeResponse serve_request(const BridgeRequest& req, const Denoiser& denoiser) {
  BridgeResponse resp;
  resp.id = req.id;
  resp.status = "ok";
  if (req.op != "denoise") return resp;
  try {
    const Index size = req.shape.size();
    VideoLatent x(req.shape, from_f32_le(base64_decode(req.data), req.frames, size));
    FrameCondition cond = FrameCondition::none(req.shape);
    cond.role = req.cond_role;
    if (req.cond_role != FrameRole::kNone) {
      require(!req.cond_data.empty(), "cond_data required for a conditioned request");
      cond.latent = from_f32_le(base64_decode(req.cond_data), 1, size);
    }
    const DenoisedPair pair = denoiser.denoise(x, req.sigma, cond);
    resp.x0_uncond = base64_encode(to_f32_le(pair.uncond.frames()));
    resp.x0_cond = base64_encode(to_f32_le(pair.cond.frames()));
  } catch (const std::exception& e) {
    resp.status = "error";
    resp.error = e.what();
  }
  return resp;
}

namespace {

[[noreturn]] void unavailable(const std::string& what) {
  throw Error(ErrorCode::kBackendUnavailable, "bridge: " + what + (errno ? std::string(": ") + std::strerror(errno) : ""));
}

void write_all(int fd, const std::string& data, bool socket) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + sent, data.size() - sent);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) unavailable("write failed");
    sent += static_cast<std::size_t>(n);
  }
}

class LineReader {
 public:
  std::string read_line(int fd) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        errno = 0;
        unavailable("connection closed by backend");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buffer_;
};

class TcpTransport final : public BridgeTransport {
 public:
  TcpTransport(std::string host, std::string port) : host_(std::move(host)), port_(std::move(port)) {}
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::string exchange(const std::string& line) override {
    if (fd_ < 0) connect();
    write_all(fd_, line + "\n", true);
    return reader_.read_line(fd_);
  }

 private:
  void connect() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res) != 0) {
      errno = 0;
      unavailable("cannot resolve " + host_ + ":" + port_);
    }
    for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
      const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) unavailable("cannot connect to " + host_ + ":" + port_);
  }

  std::string host_, port_;
  int fd_ = -1;
  LineReader reader_;
};

class StdioTransport final : public BridgeTransport {
 public:
  explicit StdioTransport(const std::string& command) {
    // A backend that exits early must surface as an error, not a signal.
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) unavailable("pipe failed");
    if (::pipe(from_child) != 0) unavailable("pipe failed");
    pid_ = ::fork();
    if (pid_ < 0) unavailable("fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
  }

  ~StdioTransport() override {
    ::close(in_);
    ::close(out_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }

  std::string exchange(const std::string& line) override {
    write_all(in_, line + "\n", false);
    return reader_.read_line(out_);
  }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  LineReader reader_;
};

}  // namespace

std::unique_ptr<BridgeTransport> make_tcp_transport(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  require(colon != std::string::npos && colon + 1 < endpoint.size(), "bridge endpoint must be host:port",
          ErrorCode::kUsage);
  return std::make_unique<TcpTransport>(endpoint.substr(0, colon), endpoint.substr(colon + 1));
}

std::unique_ptr<BridgeTransport> make_stdio_transport(const std::string& command) {
  require(!command.empty(), "bridge command is empty", ErrorCode::kUsage);
  return std::make_unique<StdioTransport>(command);
}

BridgeDenoiser::BridgeDenoiser(std::unique_ptr<BridgeTransport> transport) : transport_(std::move(transport)) {
  require(transport_ != nullptr, "bridge denoiser needs a transport");
}

BridgeResponse BridgeDenoiser::call(BridgeRequest req) const {
  std::lock_guard<std::mutex> lock(mutex_);
  req.id = next_id_++;
  errno = 0;
  BridgeResponse resp = decode_response(transport_->exchange(encode_request(req)));
  if (resp.id != req.id)
    throw Error(ErrorCode::kBackendUnavailable, "bridge: response id " + std::to_string(resp.id) +
                                                    " does not match request " + std::to_string(req.id));
  if (resp.status != "ok") throw Error(ErrorCode::kBackendUnavailable, "bridge: backend error: " + resp.error);
  return resp;
}

DenoisedPair BridgeDenoiser::denoise(const VideoLatent& x_t, double sigma, const FrameCondition& cond) const {
  require(sigma > 0.0, "denoise: sigma must be positive");
  require(cond.latent.size() == x_t.frame_size(), "denoise: condition does not match frame shape");
  const BridgeResponse resp = call(make_denoise_request(0, x_t, sigma, cond));
  auto payload = [&](const std::string& b64, const char* name) {
    try {
      return VideoLatent(x_t.shape(), from_f32_le(base64_decode(b64), x_t.frame_count(), x_t.frame_size()));
    } catch (const Error& e) {
      throw Error(ErrorCode::kBackendUnavailable, std::string("bridge: bad ") + name + " payload: " + e.what());
    }
  };
  return {payload(resp.x0_uncond, "x0_uncond"), payload(resp.x0_cond, "x0_cond")};
}

void BridgeDenoiser::ping() const {
  BridgeRequest req;
  req.op = "ping";
  call(req);
}

void BridgeDenoiser::shutdown() const {
  BridgeRequest req;
  req.op = "shutdown";
  call(req);
}

}  // namespace trslab
