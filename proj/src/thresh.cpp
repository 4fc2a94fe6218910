#include "rbcast/thresh.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace rbcast {

SimThresholdProvider::SimThresholdProvider(const ProtocolParams& params,
                                           uint64_t run_secret)
    : params_(params), secret_(run_secret) {
    params_.validate();
}

Digest SimThresholdProvider::share_mac(NodeId signer,
                                       const SignSubject& subject) const {
    Hasher h;
    h.update_byte(0x02);
    h.update_u64(secret_);
    h.update_u32(signer);
    h.update_u64(subject.instance);
    h.update(subject.root);
    return h.finish();
}

Digest SimThresholdProvider::signature_mac(
    const SignSubject& subject, const std::vector<NodeId>& signers) const {
    Hasher h;
    h.update_byte(0x03);
    h.update_u64(secret_);
    h.update_u64(subject.instance);
    h.update(subject.root);
    for (NodeId id : signers) h.update_u32(id);
    return h.finish();
}

SignatureShare SimThresholdProvider::threshold_sign(
    NodeId node, const SignSubject& subject) const {
    if (node >= params_.n)
        throw std::invalid_argument("threshold_sign: unknown node id");
    Digest mac = share_mac(node, subject);
    return SignatureShare{node, subject, {mac.begin(), mac.end()}};
}

bool SimThresholdProvider::valid_share(const SignSubject& subject,
                                       NodeId signer,
                                       const SignatureShare& share) const {
    if (signer >= params_.n) return false;
    if (share.signer != signer || !(share.subject == subject)) return false;
    Digest mac = share_mac(signer, subject);
    return share.blob.size() == mac.size() &&
           std::equal(mac.begin(), mac.end(), share.blob.begin());
}

ThresholdSignature SimThresholdProvider::compute_signature(
    const std::vector<SignatureShare>& shares) const {
    if (shares.empty())
        throw std::invalid_argument("compute_signature: no shares");
    const SignSubject& subject = shares.front().subject;
    std::set<NodeId> signers;
    for (const SignatureShare& s : shares) {
        if (!(s.subject == subject))
            throw std::invalid_argument("compute_signature: mixed subjects");
        if (!valid_share(subject, s.signer, s))
            throw std::invalid_argument("compute_signature: invalid share");
        signers.insert(s.signer);
    }
    if (signers.size() < 2 * params_.t + 1)
        throw std::invalid_argument("compute_signature: threshold not met");

    // any 2t+1 distinct signers suffice; keep the smallest ids so two
    // distinct share supersets combine to comparable signatures
    std::vector<NodeId> ids(signers.begin(), signers.end());
    ids.resize(2 * params_.t + 1);
    Digest mac = signature_mac(subject, ids);
    return ThresholdSignature{subject, std::move(ids),
                              {mac.begin(), mac.end()}};
}

bool SimThresholdProvider::valid_signature(const SignSubject& subject,
                                           const ThresholdSignature& sig) const {
    if (!(sig.subject == subject)) return false;
    if (sig.signers.size() != 2 * params_.t + 1) return false;
    std::set<NodeId> distinct(sig.signers.begin(), sig.signers.end());
    if (distinct.size() != sig.signers.size()) return false;
    for (NodeId id : sig.signers)
        if (id >= params_.n) return false;
    if (!std::is_sorted(sig.signers.begin(), sig.signers.end())) return false;
    Digest mac = signature_mac(subject, sig.signers);
    return sig.blob.size() == mac.size() &&
           std::equal(mac.begin(), mac.end(), sig.blob.begin());
}

}  // namespace rbcast
