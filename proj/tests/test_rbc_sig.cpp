#include <doctest.h>

#include "rbcast/rbc_sig.hpp"
#include "util.hpp"

using namespace rbcast;
using testutil::frag_msgs;
using testutil::random_bytes;

namespace {

std::shared_ptr<SimThresholdProvider> provider(uint32_t n,
                                               uint64_t secret = 42) {
    return std::make_shared<SimThresholdProvider>(
        ProtocolParams::high_rate(n), secret);
}

SigNode make_node(uint32_t n, NodeId self,
                  std::shared_ptr<SimThresholdProvider> prov,
                  NodeId sender = 0, bool piggyback = false) {
    SigConfig cfg;
    cfg.params = ProtocolParams::high_rate(n);
    cfg.self = self;
    cfg.sender = sender;
    cfg.instance = 1;
    cfg.piggyback_signatures = piggyback;
    cfg.provider = prov;
    return SigNode(std::move(cfg));
}

size_t count_kind(const Outbox& out, const char* kind) {
    size_t c = 0;
    for (const auto& e : out.entries)
        if (std::string(kind_name(e.msg)) == kind) ++c;
    return c;
}

SignedProposalMessage share_msg(SimThresholdProvider& prov, NodeId signer,
                                const RootHash& h) {
    return SignedProposalMessage{
        1, h, prov.threshold_sign(signer, SignSubject{1, h}), {}};
}

}  // namespace

TEST_CASE("first own-fragment from the sender emits a signed proposal and "
          "the fragment, both broadcast") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto msgs = frag_msgs(random_bytes(200, 1), ProtocolParams::high_rate(4));

    Outbox out = node.on_message(0, msgs[1], 1);
    CHECK(count_kind(out, "signed_proposal") == 1);
    CHECK(count_kind(out, "fragment") == 1);
    for (const auto& e : out.entries) CHECK(e.to == kBroadcast);

    // the share in the proposal verifies for this node
    for (const auto& e : out.entries)
        if (const auto* sp = std::get_if<SignedProposalMessage>(&e.msg)) {
            REQUIRE(sp->share.has_value());
            CHECK(sp->share->signer == 1);
            CHECK(prov->valid_share(SignSubject{1, sp->root}, 1, *sp->share));
        }
}

TEST_CASE("the sender's own broadcast fragment arriving first does not "
          "consume the sign trigger") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto msgs = frag_msgs(random_bytes(200, 9), ProtocolParams::high_rate(4));

    // the sender broadcasts its own fragment (index 0) after self-signing;
    // under reordering it may reach a node before the addressed one
    Outbox o1 = node.on_message(0, msgs[0], 1);
    CHECK(count_kind(o1, "signed_proposal") == 0);

    Outbox o2 = node.on_message(0, msgs[1], 2);
    CHECK(count_kind(o2, "signed_proposal") == 1);
    CHECK(count_kind(o2, "fragment") == 1);
}

TEST_CASE("a node signs only its first sender fragment") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto params = ProtocolParams::high_rate(4);
    auto a = frag_msgs(random_bytes(200, 2), params);
    auto b = frag_msgs(random_bytes(200, 3), params);

    Outbox o1 = node.on_message(0, a[1], 1);
    CHECK(count_kind(o1, "signed_proposal") == 1);
    // equivocating sender's second root: accepted as a fragment, not signed
    bool acc = false;
    Outbox o2 = node.on_message(0, b[1], 2, &acc);
    CHECK(acc);
    CHECK(count_kind(o2, "signed_proposal") == 0);
}

TEST_CASE("2t+1 shares produce h* and sigma*, releasing the fragment") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto msgs = frag_msgs(random_bytes(200, 4), ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;

    node.on_message(0, msgs[1], 1);  // own share is the first
    CHECK_FALSE(node.committed_root().has_value());
    node.on_message(2, share_msg(*prov, 2, h), 2);
    Outbox out = node.on_message(3, share_msg(*prov, 3, h), 2);

    REQUIRE(node.committed_root().has_value());
    CHECK(*node.committed_root() == h);
    // own fragment was already broadcast on signing; no second broadcast
    CHECK(node.fragment_roots_sent() == std::set<RootHash>{h});
    (void)out;
}

TEST_CASE("a valid full signature sets h* immediately, even past the "
          "per-peer hash limit") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto params = ProtocolParams::high_rate(4);

    // saturate H(2) with two other roots first
    auto a = frag_msgs(random_bytes(64, 5), params);
    auto b = frag_msgs(random_bytes(64, 6), params);
    node.on_message(2, a[2], 1);
    node.on_message(2, b[2], 1);

    auto c = frag_msgs(random_bytes(64, 7), params);
    RootHash h = c[0].root;
    std::vector<SignatureShare> shares;
    for (NodeId v = 0; v < 3; ++v)
        shares.push_back(prov->threshold_sign(v, SignSubject{1, h}));
    auto sig = prov->compute_signature(shares);

    // a share for a third root from peer 2 is dropped by the H limit
    bool acc = false;
    node.on_message(2, share_msg(*prov, 2, h), 2, &acc);
    CHECK_FALSE(acc);
    // the full signature bypasses it
    node.on_message(2, SignedProposalMessage{1, h, {}, sig}, 2, &acc);
    CHECK(acc);
    REQUIRE(node.committed_root().has_value());
    CHECK(*node.committed_root() == h);
    CHECK_FALSE(node.conflicting_signature_seen());
}

TEST_CASE("invalid shares and signatures are dropped") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto msgs = frag_msgs(random_bytes(64, 8), ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;
    bool acc = false;

    auto wrong_signer = share_msg(*prov, 3, h);
    node.on_message(2, wrong_signer, 1, &acc);  // signer field != origin
    CHECK_FALSE(acc);

    auto garbage = share_msg(*prov, 2, h);
    garbage.share->blob[0] ^= 0xff;
    node.on_message(2, garbage, 1, &acc);
    CHECK_FALSE(acc);

    ThresholdSignature fake{SignSubject{1, h}, {0, 1, 2},
                            std::vector<uint8_t>(32, 0xcc)};
    node.on_message(2, SignedProposalMessage{1, h, {}, fake}, 1, &acc);
    CHECK_FALSE(acc);
    CHECK_FALSE(node.committed_root().has_value());
}

TEST_CASE("delivery broadcasts proposal(h*, sigma*) before the top-ups") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov);
    auto m = random_bytes(500, 9);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;

    node.on_message(0, msgs[1], 1);
    node.on_message(2, share_msg(*prov, 2, h), 2);
    node.on_message(3, share_msg(*prov, 3, h), 2);
    node.on_message(2, msgs[2], 3);
    Outbox out = node.on_message(3, msgs[3], 3);

    REQUIRE(node.delivered().has_value());
    CHECK(*node.delivered() == m);

    // first emission of the delivering handler is the full-signature
    // proposal; any addressed fragment top-ups follow it
    bool seen_sig = false;
    for (const auto& e : out.entries) {
        if (const auto* sp = std::get_if<SignedProposalMessage>(&e.msg)) {
            if (sp->sig) {
                CHECK(prov->valid_signature(SignSubject{1, h}, *sp->sig));
                seen_sig = true;
            }
        } else if (e.to != kBroadcast) {
            CHECK(seen_sig);  // top-up after the signature broadcast
        }
    }
    CHECK(seen_sig);
}

TEST_CASE("piggyback mode rides signature material on fragments") {
    auto prov = provider(4);
    auto node = make_node(4, 1, prov, 0, true);
    auto m = random_bytes(500, 10);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;

    Outbox o1 = node.on_message(0, msgs[1], 1);
    CHECK(count_kind(o1, "signed_proposal") == 0);
    bool share_attached = false;
    for (const auto& e : o1.entries)
        if (const auto* fm = std::get_if<FragmentMessage>(&e.msg))
            share_attached = fm->attached_share.has_value();
    CHECK(share_attached);

    // incoming piggybacked shares count toward the threshold
    auto relay = [&](NodeId v) {
        auto fm = msgs[v];
        fm.attached_share = prov->threshold_sign(v, SignSubject{1, h});
        return fm;
    };
    node.on_message(2, relay(2), 2);
    Outbox o2 = node.on_message(3, relay(3), 2);

    REQUIRE(node.delivered().has_value());
    CHECK(*node.delivered() == m);
    // no standalone signed proposals in piggyback mode; top-ups carry sigma*
    CHECK(count_kind(o2, "signed_proposal") == 0);
    for (const auto& e : o2.entries)
        if (const auto* fm = std::get_if<FragmentMessage>(&e.msg))
            CHECK(fm->attached_sig.has_value());
}

TEST_CASE("delta gate defers sig delivery") {
    auto prov = provider(4);
    SigConfig cfg;
    cfg.params = ProtocolParams::high_rate(4);
    cfg.self = 1;
    cfg.sender = 0;
    cfg.instance = 1;
    cfg.delta = 5;
    cfg.provider = prov;
    SigNode node(std::move(cfg));

    auto m = random_bytes(200, 11);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;
    node.on_message(0, msgs[1], 1);
    node.on_message(2, share_msg(*prov, 2, h), 1);
    node.on_message(3, share_msg(*prov, 3, h), 1);
    node.on_message(2, msgs[2], 2);
    Outbox out = node.on_message(3, msgs[3], 2);

    CHECK_FALSE(node.delivered().has_value());
    REQUIRE(out.wake_at.has_value());
    CHECK(*out.wake_at == 6);
    node.on_timer(6);
    CHECK(node.delivered().has_value());
}
