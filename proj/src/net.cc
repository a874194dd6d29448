/*
 * Copyright 2026 The Maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "maskfed/errors.h"
#include "maskfed/transport.h"

namespace maskfed {
namespace {

std::string ErrnoText(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

struct PipeBuffer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<uint8_t> bytes;
  bool closed = false;
};

class MemoryPipeEnd : public ByteStream {
 public:
  MemoryPipeEnd(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out,
                bool confidential)
      : in_(std::move(in)), out_(std::move(out)), confidential_(confidential) {}
  ~MemoryPipeEnd() override { Close(); }

  void WriteAll(std::span<const uint8_t> bytes) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw IoError("write to closed pipe");
    out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
    out_->cv.notify_all();
  }

  size_t ReadSome(std::span<uint8_t> out) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->bytes.empty() || in_->closed; });
    const size_t n = std::min(out.size(), in_->bytes.size());
    std::copy_n(in_->bytes.begin(), n, out.begin());
    in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<ptrdiff_t>(n));
    return n;
  }

  void Close() override {
    for (auto* buf : {in_.get(), out_.get()}) {
      std::lock_guard lock(buf->mu);
      buf->closed = true;
      buf->cv.notify_all();
    }
  }

  bool IsConfidential() const override { return confidential_; }

 private:
  std::shared_ptr<PipeBuffer> in_;
  std::shared_ptr<PipeBuffer> out_;
  bool confidential_;
};

addrinfo* Resolve(const std::string& address, bool passive) {
  auto [host, port] = SplitAddress(address);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(),
                             port_str.c_str(), &hints, &res);
  if (rc != 0) throw IoError("resolve " + address + ": " + gai_strerror(rc));
  return res;
}

}  // namespace

void BufferStream::WriteAll(std::span<const uint8_t> bytes) {
  if (closed_) throw IoError("write to closed buffer stream");
  output_.insert(output_.end(), bytes.begin(), bytes.end());
}

size_t BufferStream::ReadSome(std::span<uint8_t> out) {
  const size_t n = std::min(out.size(), input_.size() - pos_);
  std::copy_n(input_.begin() + static_cast<ptrdiff_t>(pos_), n, out.begin());
  pos_ += n;
  return n;
}

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>
MakeMemoryPipe(bool confidential) {
  auto a_to_b = std::make_shared<PipeBuffer>();
  auto b_to_a = std::make_shared<PipeBuffer>();
  return {std::make_unique<MemoryPipeEnd>(b_to_a, a_to_b, confidential),
          std::make_unique<MemoryPipeEnd>(a_to_b, b_to_a, confidential)};
}

std::pair<std::string, uint16_t> SplitAddress(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("address '" + address + "' lacks ':port'");
  }
  const std::string port = address.substr(colon + 1);
  size_t used = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || port.empty() || value > 65535) {
    throw std::invalid_argument("bad port in address '" + address + "'");
  }
  return {address.substr(0, colon), static_cast<uint16_t>(value)};
}

TcpStream::TcpStream(int fd) : fd_(fd) {
  int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream::~TcpStream() { Close(); }

std::unique_ptr<TcpStream> TcpStream::Connect(const std::string& address,
                                              std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string last_error = "timed out";
  for (;;) {
    addrinfo* res = Resolve(address, false);
    const int fd = socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      freeaddrinfo(res);
      throw IoError(ErrnoText("socket"));
    }
    const int rc = connect(fd, res->ai_addr, res->ai_addrlen);
    freeaddrinfo(res);
    if (rc == 0) return std::make_unique<TcpStream>(fd);
    last_error = ErrnoText("connect " + address);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw Timeout(last_error);
}

void TcpStream::SetIoTimeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void TcpStream::WriteAll(std::span<const uint8_t> bytes) {
  if (fd_ < 0) throw IoError("write to closed socket");
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw Timeout("socket write timed out");
      throw IoError(ErrnoText("send"));
    }
    sent += static_cast<size_t>(n);
  }
}

size_t TcpStream::ReadSome(std::span<uint8_t> out) {
  if (fd_ < 0) throw IoError("read from closed socket");
  for (;;) {
    const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n >= 0) return static_cast<size_t>(n);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) throw Timeout("socket read timed out");
    if (errno == ECONNRESET) return 0;
    throw IoError(ErrnoText("recv"));
  }
}

void TcpStream::Close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const std::string& address) {
  addrinfo* res = Resolve(address, true);
  fd_ = socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    freeaddrinfo(res);
    throw IoError(ErrnoText("socket"));
  }
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const int rc = bind(fd_, res->ai_addr, res->ai_addrlen);
  freeaddrinfo(res);
  if (rc != 0 || listen(fd_, 64) != 0) {
    const std::string msg = ErrnoText("bind/listen " + address);
    ::close(fd_);
    throw IoError(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { ::close(fd_); }

std::unique_ptr<TcpStream> TcpListener::Accept(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc < 0) {
    if (errno == EINTR) return nullptr;
    throw IoError(ErrnoText("poll"));
  }
  if (rc == 0) return nullptr;
  const int fd = accept(fd_, nullptr, nullptr);
  if (fd < 0) {
    if (errno == EINTR || errno == EAGAIN || errno == ECONNABORTED) return nullptr;
    throw IoError(ErrnoText("accept"));
  }
  return std::make_unique<TcpStream>(fd);
}

}  // namespace maskfed
