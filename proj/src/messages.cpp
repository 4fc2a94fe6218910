#include "rbcast/messages.hpp"

namespace rbcast {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 7; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_bytes(std::vector<uint8_t>& out, std::span<const uint8_t> b) {
    out.insert(out.end(), b.begin(), b.end());
}

void put_share(std::vector<uint8_t>& out, const SignatureShare& s) {
    put_u32(out, s.signer);
    put_u16(out, uint16_t(s.blob.size()));
    put_bytes(out, s.blob);
}

void put_sig(std::vector<uint8_t>& out, const ThresholdSignature& s) {
    put_u16(out, uint16_t(s.signers.size()));
    for (NodeId id : s.signers) put_u32(out, id);
    put_u16(out, uint16_t(s.blob.size()));
    put_bytes(out, s.blob);
}

}  // namespace

std::vector<uint8_t> encode_message(const Message& msg) {
    std::vector<uint8_t> out;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FragmentMessage>) {
                out.push_back(0x01);
                put_u64(out, m.instance);
                put_bytes(out, m.root);
                put_u32(out, m.leaf_index);
                put_u32(out, uint32_t(m.fragment.index));
                put_u32(out, uint32_t(m.fragment.payload.size()));
                put_bytes(out, m.fragment.payload);
                put_u32(out, m.proof.leaf_index);
                put_u16(out, uint16_t(m.proof.siblings.size()));
                for (const Digest& d : m.proof.siblings) put_bytes(out, d);
                uint8_t flags = (m.attached_share ? 1 : 0) |
                                (m.attached_sig ? 2 : 0);
                out.push_back(flags);
                if (m.attached_share) put_share(out, *m.attached_share);
                if (m.attached_sig) put_sig(out, *m.attached_sig);
            } else if constexpr (std::is_same_v<T, ProposalMessage>) {
                out.push_back(0x02);
                put_u64(out, m.instance);
                put_bytes(out, m.root);
            } else {
                out.push_back(0x03);
                put_u64(out, m.instance);
                put_bytes(out, m.root);
                out.push_back(m.share ? 1 : 2);
                if (m.share) put_share(out, *m.share);
                if (m.sig) put_sig(out, *m.sig);
            }
        },
        msg);
    return out;
}

size_t wire_size(const Message& msg) { return encode_message(msg).size(); }

size_t signature_bytes(const Message& msg) {
    auto share_sz = [](const SignatureShare& s) { return 6 + s.blob.size(); };
    auto sig_sz = [](const ThresholdSignature& s) {
        return 4 + 4 * s.signers.size() + s.blob.size();
    };
    return std::visit(
        [&](const auto& m) -> size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FragmentMessage>) {
                size_t b = 0;
                if (m.attached_share) b += share_sz(*m.attached_share);
                if (m.attached_sig) b += sig_sz(*m.attached_sig);
                return b;
            } else if constexpr (std::is_same_v<T, SignedProposalMessage>) {
                size_t b = 0;
                if (m.share) b += share_sz(*m.share);
                if (m.sig) b += sig_sz(*m.sig);
                return b;
            } else {
                return 0;
            }
        },
        msg);
}

const char* kind_name(const Message& msg) {
    return std::visit(
        [](const auto& m) -> const char* {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FragmentMessage>)
                return "fragment";
            else if constexpr (std::is_same_v<T, ProposalMessage>)
                return "proposal";
            else
                return "signed_proposal";
        },
        msg);
}

uint64_t instance_of(const Message& msg) {
    return std::visit([](const auto& m) { return m.instance; }, msg);
}

}  // namespace rbcast
