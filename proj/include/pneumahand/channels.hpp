#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace pneumahand {

// The 16 air channels. Integer codes are part of the wire format and must not
// be reordered.
enum class ChannelId : std::uint8_t {
  IndexBase = 0,
  IndexTip = 1,
  MiddleBase = 2,
  MiddleTip = 3,
  RingBase = 4,
  RingTip = 5,
  LittleBase = 6,
  LittleTip = 7,
  ThumbProximal = 8,
  ThumbMiddle = 9,
  ThumbDistal = 10,
  ThumbTip = 11,
  PalmBellow = 12,
  AbductionIndexMiddle = 13,
  AbductionMiddleRing = 14,
  AbductionRingLittle = 15,
};

inline constexpr std::size_t kChannelCount = 16;

template <typename T>
using PerChannel = std::array<T, kChannelCount>;

inline constexpr std::array<ChannelId, kChannelCount> kAllChannels = {
    ChannelId::IndexBase,     ChannelId::IndexTip,
    ChannelId::MiddleBase,    ChannelId::MiddleTip,
    ChannelId::RingBase,      ChannelId::RingTip,
    ChannelId::LittleBase,    ChannelId::LittleTip,
    ChannelId::ThumbProximal, ChannelId::ThumbMiddle,
    ChannelId::ThumbDistal,   ChannelId::ThumbTip,
    ChannelId::PalmBellow,    ChannelId::AbductionIndexMiddle,
    ChannelId::AbductionMiddleRing, ChannelId::AbductionRingLittle,
};

constexpr std::size_t index(ChannelId id) { return static_cast<std::size_t>(id); }

std::string_view channel_name(ChannelId id);
std::optional<ChannelId> channel_from_name(std::string_view name);
std::optional<ChannelId> channel_from_code(int code);

// Channels driven by a PneuFlex compartment (joint coordinate = bend angle).
constexpr bool is_compartment(ChannelId id) {
  return index(id) <= index(ChannelId::LittleTip) || id == ChannelId::ThumbTip;
}

// Channels driven by a bellow across a hinge (joint coordinate = opening).
constexpr bool is_bellow(ChannelId id) { return !is_compartment(id); }

}  // namespace pneumahand
