#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "spinsched/geometry.hpp"
#include "spinsched/scheduling.hpp"
#include "spinsched/spinimage.hpp"

namespace spinsched {

// Frame layout (all integers big-endian):
//
//   u32 length        bytes that follow: tag + payload
//   u8  tag
//   payload
//
//   WorkRequest    0x01  (empty)
//   Assign         0x02  u64 start, u64 end
//   Terminate      0x03  (empty)
//   Results        0x04  u64 count, count x { u64 origin, u32 W, W*W x u32 bin }
//   CloudTransfer  0x05  u64 M, M x 6 x IEEE-754 binary64 (px py pz nx ny nz)
enum class MessageTag : std::uint8_t {
  kWorkRequest = 0x01,
  kAssign = 0x02,
  kTerminate = 0x03,
  kResults = 0x04,
  kCloudTransfer = 0x05,
};

struct WorkRequest {
  friend bool operator==(const WorkRequest&, const WorkRequest&) = default;
};
struct Assign {
  ChunkRange range;
  friend bool operator==(const Assign&, const Assign&) = default;
};
struct Terminate {
  friend bool operator==(const Terminate&, const Terminate&) = default;
};
struct Results {
  std::vector<SpinImage> images;
  friend bool operator==(const Results&, const Results&) = default;
};
struct CloudTransfer {
  std::vector<OrientedPoint> points;
  friend bool operator==(const CloudTransfer&, const CloudTransfer&) = default;
};

using Message = std::variant<WorkRequest, Assign, Terminate, Results, CloudTransfer>;

MessageTag tag_of(const Message& message);
std::string_view to_string(MessageTag tag);

inline constexpr std::size_t kFrameHeaderSize = 4;

// Complete frame including the length prefix.
std::vector<std::uint8_t> encode_frame(const Message& message);

// Decodes the bytes after the length prefix (tag + payload). Throws
// ProtocolError on an unknown tag, a short or overlong payload, or an
// Assign with start >= end.
Message decode_body(std::span<const std::uint8_t> body);

// Decodes one complete frame; the prefix must match the buffer length.
Message decode_frame(std::span<const std::uint8_t> frame);

// Body length announced by a frame header.
std::uint32_t read_frame_length(std::span<const std::uint8_t, kFrameHeaderSize> header);

/// Incremental decoder for a byte stream carrying back-to-back frames.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete message, or nullopt if more bytes are needed.
  std::optional<Message> next();
  std::size_t buffered() const noexcept { return buffer_.size() - consumed_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t consumed_ = 0;
};

}  // namespace spinsched
