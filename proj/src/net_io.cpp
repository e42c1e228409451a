// SPDX-License-Identifier: Apache-2.0
#include "net_io.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace obliqc::net {

Endpoint parse_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= addr.size())
    fail(Errc::config_error, "address must be host:port, got '" + addr + "'");
  Endpoint ep;
  ep.host = addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (...) {
    fail(Errc::config_error, "bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) fail(Errc::config_error, "port out of range");
  ep.port = uint16_t(port);
  return ep;
}

void write_all(int fd, std::span<const uint8_t> bytes) {
  size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      fail(Errc::io_error, "socket write failed");
    }
    off += size_t(n);
  }
}

bool read_exact(int fd, uint8_t* out, size_t n) {
  size_t off = 0;
  while (off < n) {
    ssize_t r = ::recv(fd, out + off, n - off, 0);
    if (r == 0) {
      if (off == 0) return false;
      fail(Errc::truncated_payload, "peer closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      fail(Errc::io_error, std::string("socket read failed: ") + std::strerror(errno));
    }
    off += size_t(r);
  }
  return true;
}

std::optional<std::vector<uint8_t>> read_frame(int fd) {
  std::vector<uint8_t> frame(wire::kHeaderBytes);
  if (!read_exact(fd, frame.data(), wire::kHeaderBytes)) return std::nullopt;
  const size_t total = wire::frame_size_from_header(frame);
  frame.resize(total);
  if (total > wire::kHeaderBytes &&
      !read_exact(fd, frame.data() + wire::kHeaderBytes,
                  total - wire::kHeaderBytes))
    fail(Errc::truncated_payload, "peer closed mid-frame");
  return frame;
}

int connect_to(const Endpoint& ep) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail(Errc::connection_failed, "cannot create socket");
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    fail(Errc::connection_failed, "address must be numeric IPv4: " + ep.host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    ::close(fd);
    fail(Errc::connection_failed,
         "cannot connect to " + ep.host + ":" + std::to_string(ep.port));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace obliqc::net
