#include "spinsched/protocol.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "spinsched/error.hpp"

namespace spinsched {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (auto byte : b) v = (v << 8) | byte;
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (auto byte : b) v = (v << 8) | byte;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t left() const noexcept { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (left() < n) throw ProtocolError("truncated message payload");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

// Guards count fields against allocation blow-ups from corrupt frames.
void check_count(std::uint64_t count, std::size_t min_bytes_each, const Reader& r) {
  if (min_bytes_each != 0 && count > r.left() / min_bytes_each) {
    throw ProtocolError("element count " + std::to_string(count) + " exceeds payload size");
  }
}

}  // namespace

MessageTag tag_of(const Message& message) {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, WorkRequest>) return MessageTag::kWorkRequest;
        else if constexpr (std::is_same_v<T, Assign>) return MessageTag::kAssign;
        else if constexpr (std::is_same_v<T, Terminate>) return MessageTag::kTerminate;
        else if constexpr (std::is_same_v<T, Results>) return MessageTag::kResults;
        else return MessageTag::kCloudTransfer;
      },
      message);
}

std::string_view to_string(MessageTag tag) {
  switch (tag) {
    case MessageTag::kWorkRequest: return "WorkRequest";
    case MessageTag::kAssign: return "Assign";
    case MessageTag::kTerminate: return "Terminate";
    case MessageTag::kResults: return "Results";
    case MessageTag::kCloudTransfer: return "CloudTransfer";
  }
  return "Unknown";
}

std::vector<std::uint8_t> encode_frame(const Message& message) {
  Writer w;
  w.u32(0);  // patched below
  w.u8(static_cast<std::uint8_t>(tag_of(message)));
  if (const auto* a = std::get_if<Assign>(&message)) {
    w.u64(a->range.start);
    w.u64(a->range.end);
  } else if (const auto* r = std::get_if<Results>(&message)) {
    w.u64(r->images.size());
    for (const auto& image : r->images) {
      w.u64(image.origin_index());
      w.u32(image.width());
      for (auto bin : image.bins()) w.u32(bin);
    }
  } else if (const auto* c = std::get_if<CloudTransfer>(&message)) {
    w.u64(c->points.size());
    for (const auto& p : c->points) {
      w.f64(p.position.x);
      w.f64(p.position.y);
      w.f64(p.position.z);
      w.f64(p.normal.x);
      w.f64(p.normal.y);
      w.f64(p.normal.z);
    }
  }
  auto frame = w.take();
  const std::size_t body = frame.size() - kFrameHeaderSize;
  if (body > std::numeric_limits<std::uint32_t>::max()) {
    throw ProtocolError("message of " + std::to_string(body) + " bytes exceeds frame limit");
  }
  for (int i = 0; i < 4; ++i) frame[i] = static_cast<std::uint8_t>(body >> (24 - 8 * i));
  return frame;
}

Message decode_body(std::span<const std::uint8_t> body) {
  Reader r(body);
  if (r.left() == 0) throw ProtocolError("empty frame");
  const std::uint8_t tag = r.u8();
  Message message;
  switch (static_cast<MessageTag>(tag)) {
    case MessageTag::kWorkRequest:
      message = WorkRequest{};
      break;
    case MessageTag::kAssign: {
      Assign a;
      a.range.start = r.u64();
      a.range.end = r.u64();
      if (a.range.start >= a.range.end) {
        throw ProtocolError("Assign range [" + std::to_string(a.range.start) + ", " +
                            std::to_string(a.range.end) + ") is empty");
      }
      message = a;
      break;
    }
    case MessageTag::kTerminate:
      message = Terminate{};
      break;
    case MessageTag::kResults: {
      Results res;
      const std::uint64_t count = r.u64();
      check_count(count, 12, r);
      res.images.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t origin = r.u64();
        const std::uint32_t width = r.u32();
        const std::uint64_t cells = std::uint64_t{width} * width;
        check_count(cells, 4, r);
        std::vector<std::uint32_t> bins(cells);
        for (auto& b : bins) b = r.u32();
        if (width == 0) throw ProtocolError("spin image with zero width");
        res.images.emplace_back(origin, width, std::move(bins));
      }
      message = std::move(res);
      break;
    }
    case MessageTag::kCloudTransfer: {
      CloudTransfer c;
      const std::uint64_t count = r.u64();
      check_count(count, 48, r);
      c.points.resize(count);
      for (auto& p : c.points) {
        p.position = {r.f64(), r.f64(), r.f64()};
        p.normal = {r.f64(), r.f64(), r.f64()};
      }
      message = std::move(c);
      break;
    }
    default:
    {
      char hex[8];
      std::snprintf(hex, sizeof hex, "0x%02x", tag);
      throw ProtocolError(std::string("unknown message tag ") + hex);
    }
  }
  if (r.left() != 0) {
    throw ProtocolError(std::to_string(r.left()) + " trailing bytes after " +
                        std::string(to_string(tag_of(message))) + " payload");
  }
  return message;
}

std::uint32_t read_frame_length(std::span<const std::uint8_t, kFrameHeaderSize> header) {
  return (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
         (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
}

Message decode_frame(std::span<const std::uint8_t> frame) {
  if (frame.size() < kFrameHeaderSize) throw ProtocolError("frame shorter than its length prefix");
  const std::uint32_t length = read_frame_length(frame.first<kFrameHeaderSize>());
  if (frame.size() - kFrameHeaderSize != length) {
    throw ProtocolError("frame length prefix " + std::to_string(length) + " does not match " +
                        std::to_string(frame.size() - kFrameHeaderSize) + " body bytes");
  }
  return decode_body(frame.subspan(kFrameHeaderSize));
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (consumed_ > 0 && consumed_ == buffer_.size()) {
    buffer_.clear();
    consumed_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameDecoder::next() {
  if (buffered() < kFrameHeaderSize) return std::nullopt;
  std::span<const std::uint8_t> view(buffer_.data() + consumed_, buffered());
  const std::uint32_t length = read_frame_length(view.first<kFrameHeaderSize>());
  if (view.size() - kFrameHeaderSize < length) return std::nullopt;
  auto message = decode_body(view.subspan(kFrameHeaderSize, length));
  consumed_ += kFrameHeaderSize + length;
  return message;
}

}  // namespace spinsched
