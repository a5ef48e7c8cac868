#include "codec/vqvae.h"

#include <cmath>

#include "core/optim.h"

namespace t3m::codec {

using nn::Tensor;

void Codebook::init(Rng& rng, int64_t size, int64_t dz) {
    if (size < 2) throw ConfigError("codebook needs at least 2 entries");
    entries = Tensor::zeros({size, dz}, true);
    for (double& v : *entries.data) v = rng.normal(0.0, 0.5);
    reset_usage();
}

std::vector<int64_t> nearest_entries(const Tensor& rows, const Tensor& entries) {
    if (rows.rank() != 2 || entries.rank() != 2 || rows.dim(1) != entries.dim(1))
        throw DataError("nearest_entries: rows " + rows.shape_str() + " vs entries " + entries.shape_str());
    const int64_t n = rows.dim(0), k = entries.dim(0), d = rows.dim(1);
    if (k < 1) throw DataError("nearest_entries: empty codebook");
    std::vector<int64_t> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double* e = rows.ptr() + i * d;
        double best = 0.0;
        int64_t best_j = 0;
        for (int64_t j = 0; j < k; ++j) {
            const double* z = entries.ptr() + j * d;
            double dist = 0.0;
            for (int64_t c = 0; c < d; ++c) {
                const double dv = e[c] - z[c];
                dist += dv * dv;
            }
            if (j == 0 || dist < best) {
                best = dist;
                best_j = j;
            }
        }
        out[static_cast<size_t>(i)] = best_j;
    }
    return out;
}

Quantized quantize(const Tensor& e, Codebook& cb, bool count_usage) {
    const bool batched = e.rank() == 3;
    if (!batched && e.rank() != 2) throw DataError("quantize: expected rank-2/3 latent, got " + e.shape_str());
    const int64_t n = batched ? e.dim(0) : 1;
    const int64_t dz = batched ? e.dim(1) : e.dim(0);
    const int64_t tau = batched ? e.dim(2) : e.dim(1);
    if (dz != cb.dim())
        throw DataError("quantize: latent dim " + std::to_string(dz) + " != codebook dim " +
                        std::to_string(cb.dim()));

    Quantized q;
    q.e_rows = nn::nct_to_rows(e);  // [n*tau, dz]
    q.tokens = nearest_entries(q.e_rows, cb.entries);
    if (count_usage)
        for (int64_t t : q.tokens) cb.usage[static_cast<size_t>(t)] += 1;
    q.zq_rows = nn::gather_rows(cb.entries, q.tokens);
    Tensor zq_pure = nn::rows_to_nct(nn::detach(q.zq_rows), n, tau);
    // forward value: snapped entries; backward: identity into e
    q.zq = nn::add(e, nn::detach(nn::sub(zq_pure, e)));
    return q;
}

Tensor vq_loss(const Tensor& a, const Tensor& a_hat, const Tensor& e_rows, const Tensor& zq_rows,
               double alpha, double lambda) {
    Tensor rec = nn::mse(a, a_hat);
    Tensor codebook_term = nn::mse(nn::detach(e_rows), zq_rows);
    Tensor commit_term = nn::mse(e_rows, nn::detach(zq_rows));
    return nn::add(rec, nn::add(nn::scale(codebook_term, alpha), nn::scale(commit_term, lambda)));
}

void VqEncoderConfig::validate() const {
    if ((int64_t(1) << downsample_count) != kWindow)
        throw ConfigError("encoder config: 2^downsample_count must equal the temporal window " +
                          std::to_string(kWindow));
    if (residual_layers != 3) throw ConfigError("encoder config: residual_layers is fixed at 3");
}

void ResLayer::init(Rng& rng, int64_t in_ch, int64_t out_ch, const VqEncoderConfig& cfg) {
    c1.init(rng, in_ch, out_ch, cfg.kernel, cfg.stride, cfg.pad);
    c2.init(rng, out_ch, out_ch, cfg.kernel, cfg.stride, cfg.pad);
    b1.init(out_ch);
    b2.init(out_ch);
    if (in_ch != out_ch) proj.init(rng, in_ch, out_ch, 1, 1, 0);
}

Tensor ResLayer::forward(const Tensor& x) {
    Tensor h = nn::leaky_relu(b1.forward(c1.forward(x)));
    h = b2.forward(c2.forward(h));
    Tensor shortcut = proj.w.defined() ? proj.forward(x) : x;
    return nn::leaky_relu(nn::add(h, shortcut));
}

void ResLayer::state(const std::string& prefix, std::vector<nn::NamedParam>& out) {
    c1.state(prefix + ".c1", out);
    c2.state(prefix + ".c2", out);
    b1.state(prefix + ".b1", out);
    b2.state(prefix + ".b2", out);
    if (proj.w.defined()) proj.state(prefix + ".proj", out);
}

void ResLayer::set_training(bool on) {
    b1.training = on;
    b2.training = on;
}

void VqStream::init(Rng& rng, int64_t io_ch, int64_t vocab, const VqEncoderConfig& cfg) {
    io_channels = io_ch;
    const int64_t w = cfg.channel_width;
    enc_res[0].init(rng, io_ch, w, cfg);
    enc_res[1].init(rng, w, w, cfg);
    enc_res[2].init(rng, w, w, cfg);
    for (int i = 0; i < 2; ++i) {
        enc_down[i].init(rng, w, w, cfg.down_kernel, cfg.down_stride, cfg.down_pad);
        enc_down_bn[i].init(w);
    }
    enc_fc.init(rng, w, kLatentDim);

    dec_fc.init(rng, kLatentDim, w);
    dec_res[0].init(rng, w, w, cfg);
    dec_res[1].init(rng, w, w, cfg);
    dec_res[2].init(rng, w, w, cfg);
    for (int i = 0; i < 2; ++i) {
        dec_up[i].init(rng, w, w, cfg.down_kernel, cfg.down_stride, cfg.down_pad);
        dec_up_bn[i].init(w);
    }
    dec_out.init(rng, w, io_ch, cfg.kernel, cfg.stride, cfg.pad);

    codebook.init(rng, vocab, kLatentDim);
}

Tensor VqStream::encode(const Tensor& x) {
    const bool batched = x.rank() == 3;
    const int64_t ch = batched ? x.dim(1) : x.dim(0);
    const int64_t t = batched ? x.dim(2) : x.dim(1);
    if (ch != io_channels)
        throw DataError("encode: stream expects " + std::to_string(io_channels) + " channels, got " +
                        std::to_string(ch));
    if (t < kWindow || t % kWindow != 0)
        throw DataError("encode: length " + std::to_string(t) + " is not a positive multiple of " +
                        std::to_string(kWindow) + "; crop the input to a multiple of the temporal window");
    Tensor h = enc_res[0].forward(x);
    h = nn::leaky_relu(enc_down_bn[0].forward(enc_down[0].forward(h)));
    h = enc_res[1].forward(h);
    h = nn::leaky_relu(enc_down_bn[1].forward(enc_down[1].forward(h)));
    h = enc_res[2].forward(h);
    const int64_t n = batched ? x.dim(0) : 1;
    return nn::rows_to_nct(enc_fc.forward(nn::nct_to_rows(h)), n, t / kWindow);
}

Tensor VqStream::decode(const Tensor& zq) {
    const bool batched = zq.rank() == 3;
    const int64_t dz = batched ? zq.dim(1) : zq.dim(0);
    const int64_t tau = batched ? zq.dim(2) : zq.dim(1);
    if (dz != kLatentDim)
        throw DataError("decode: latent dim " + std::to_string(dz) + " != " + std::to_string(kLatentDim));
    const int64_t n = batched ? zq.dim(0) : 1;
    Tensor h = nn::rows_to_nct(dec_fc.forward(nn::nct_to_rows(zq)), n, tau);
    h = dec_res[0].forward(h);
    h = nn::leaky_relu(dec_up_bn[0].forward(dec_up[0].forward(h)));
    h = dec_res[1].forward(h);
    h = nn::leaky_relu(dec_up_bn[1].forward(dec_up[1].forward(h)));
    h = dec_res[2].forward(h);
    return dec_out.forward(h);
}

void VqStream::state(const std::string& prefix, std::vector<nn::NamedParam>& out) {
    for (int i = 0; i < 3; ++i) enc_res[i].state(prefix + ".enc_res" + std::to_string(i), out);
    for (int i = 0; i < 2; ++i) {
        enc_down[i].state(prefix + ".enc_down" + std::to_string(i), out);
        enc_down_bn[i].state(prefix + ".enc_down_bn" + std::to_string(i), out);
    }
    enc_fc.state(prefix + ".enc_fc", out);
    dec_fc.state(prefix + ".dec_fc", out);
    for (int i = 0; i < 3; ++i) dec_res[i].state(prefix + ".dec_res" + std::to_string(i), out);
    for (int i = 0; i < 2; ++i) {
        dec_up[i].state(prefix + ".dec_up" + std::to_string(i), out);
        dec_up_bn[i].state(prefix + ".dec_up_bn" + std::to_string(i), out);
    }
    dec_out.state(prefix + ".dec_out", out);
    out.push_back({prefix + ".codebook", &codebook.entries});
}

void VqStream::set_training(bool on) {
    for (int i = 0; i < 3; ++i) {
        enc_res[i].set_training(on);
        dec_res[i].set_training(on);
    }
    for (int i = 0; i < 2; ++i) {
        enc_down_bn[i].training = on;
        dec_up_bn[i].training = on;
    }
}

int64_t TokenSeq::len() const {
    if (body.size() != hand.size())
        throw DataError("token sequence streams disagree: body " + std::to_string(body.size()) +
                        " vs hand " + std::to_string(hand.size()));
    return static_cast<int64_t>(body.size());
}

void VqCodec::init(Rng& rng, int64_t vocab_body, int64_t vocab_hand, const VqEncoderConfig& cfg_) {
    cfg = cfg_;
    cfg.validate();
    body.init(rng, motion::MotionSequence::kBody, vocab_body, cfg);
    hand.init(rng, motion::MotionSequence::kHand, vocab_hand, cfg);
}

TokenSeq VqCodec::encode_tokens(const motion::MotionSequence& m, int64_t t0, int64_t len) {
    nn::NoGradGuard ng;
    TokenSeq out;
    Tensor bx = motion::slice_ct(m, motion::MotionSequence::kBodyOff, motion::MotionSequence::kBody, t0, len);
    Tensor hx = motion::slice_ct(m, motion::MotionSequence::kHandOff, motion::MotionSequence::kHand, t0, len);
    out.body = nearest_entries(nn::nct_to_rows(body.encode(bx)), body.codebook.entries);
    out.hand = nearest_entries(nn::nct_to_rows(hand.encode(hx)), hand.codebook.entries);
    return out;
}

std::pair<Tensor, Tensor> VqCodec::decode_tokens(const TokenSeq& tokens) {
    nn::NoGradGuard ng;
    const int64_t tau = tokens.len();
    if (tau < 1) throw DataError("decode_tokens: empty token sequence");
    Tensor zb = nn::rows_to_nct(nn::gather_rows(body.codebook.entries, tokens.body), 1, tau);
    Tensor zh = nn::rows_to_nct(nn::gather_rows(hand.codebook.entries, tokens.hand), 1, tau);
    return {body.decode(zb), hand.decode(zh)};
}

void VqCodec::state(std::vector<nn::NamedParam>& out) {
    body.state("body", out);
    hand.state("hand", out);
}

void VqCodec::set_training(bool on) {
    body.set_training(on);
    hand.set_training(on);
}

void VqCodec::freeze() {
    set_training(false);
    std::vector<nn::NamedParam> ps;
    state(ps);
    nn::set_requires_grad(ps, false);
}

CodecTrainStats train_vqvae(VqCodec& codec, const std::vector<const motion::MotionSequence*>& motions,
                            const CodecTrainConfig& cfg) {
    if (motions.empty()) throw UsageError("train_vqvae: empty dataset");
    using motion::MotionSequence;

    // common crop length: multiple of the window, no longer than any sequence
    int64_t len = cfg.seq_len - cfg.seq_len % kWindow;
    for (const MotionSequence* m : motions) {
        const int64_t usable = m->frames - m->frames % kWindow;
        if (usable < kWindow)
            throw DataError("train_vqvae: sequence with " + std::to_string(m->frames) +
                            " frames is shorter than the temporal window");
        len = std::min(len, usable);
    }
    if (len < kWindow) throw UsageError("train_vqvae: crop length must be at least " + std::to_string(kWindow));

    codec.set_training(true);
    std::vector<nn::NamedParam> ps;
    codec.state(ps);
    nn::Adam opt(ps, cfg.lr);

    // last-good snapshot (params + buffers) for divergence recovery
    auto snapshot = [&] {
        std::vector<std::vector<double>> s;
        s.reserve(ps.size());
        for (const nn::NamedParam& p : ps) s.push_back(*p.tensor->data);
        return s;
    };
    auto restore = [&](const std::vector<std::vector<double>>& s) {
        for (size_t i = 0; i < ps.size(); ++i) *ps[i].tensor->data = s[i];
    };
    std::vector<std::vector<double>> last_good = snapshot();

    Rng shuffle_rng(mix_seed(cfg.seed, "vqvae-shuffle"));
    CodecTrainStats stats;

    const int64_t n = static_cast<int64_t>(motions.size());
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int64_t i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[shuffle_rng.uniform_int(static_cast<uint64_t>(i + 1))]);
        codec.body.codebook.reset_usage();
        codec.hand.codebook.reset_usage();

        double recon_sum = 0.0, commit_sum = 0.0;
        int64_t n_batches = 0;
        std::vector<double> last_body_rows, last_hand_rows;
        int64_t last_rows = 0;

        for (int64_t start = 0; start < n; start += cfg.batch) {
            const int64_t bs = std::min(cfg.batch, n - start);
            Tensor bx = bs == 1 ? Tensor::zeros({MotionSequence::kBody, len})
                                : Tensor::zeros({bs, MotionSequence::kBody, len});
            Tensor hx = bs == 1 ? Tensor::zeros({MotionSequence::kHand, len})
                                : Tensor::zeros({bs, MotionSequence::kHand, len});
            for (int64_t bi = 0; bi < bs; ++bi) {
                const MotionSequence& m = *motions[static_cast<size_t>(order[static_cast<size_t>(start + bi)])];
                const int64_t slack = m.frames - len;
                const int64_t t0 =
                    slack > 0 ? static_cast<int64_t>(shuffle_rng.uniform_int(static_cast<uint64_t>(slack + 1))) : 0;
                for (int64_t c = 0; c < MotionSequence::kBody; ++c)
                    for (int64_t t = 0; t < len; ++t)
                        (*bx.data)[(bi * MotionSequence::kBody + c) * len + t] =
                            static_cast<double>(m.row(t0 + t)[MotionSequence::kBodyOff + c]);
                for (int64_t c = 0; c < MotionSequence::kHand; ++c)
                    for (int64_t t = 0; t < len; ++t)
                        (*hx.data)[(bi * MotionSequence::kHand + c) * len + t] =
                            static_cast<double>(m.row(t0 + t)[MotionSequence::kHandOff + c]);
            }

            opt.zero_grad();
            Tensor eb = codec.body.encode(bx);
            Tensor eh = codec.hand.encode(hx);
            Quantized qb = quantize(eb, codec.body.codebook, true);
            Quantized qh = quantize(eh, codec.hand.codebook, true);
            Tensor bhat = codec.body.decode(qb.zq);
            Tensor hhat = codec.hand.decode(qh.zq);
            Tensor loss_b = vq_loss(bx, bhat, qb.e_rows, qb.zq_rows, cfg.alpha, cfg.lambda);
            Tensor loss_h = vq_loss(hx, hhat, qh.e_rows, qh.zq_rows, cfg.alpha, cfg.lambda);
            Tensor loss = nn::add(loss_b, loss_h);

            if (!std::isfinite(loss.item())) {
                restore(last_good);
                throw DivergenceError("train_vqvae: non-finite loss at epoch " + std::to_string(epoch) +
                                      ", restored last-good parameters");
            }
            nn::backward(loss);
            opt.step();
            stats.steps += 1;

            recon_sum += nn::mse(bx, nn::detach(bhat)).item() + nn::mse(hx, nn::detach(hhat)).item();
            commit_sum += nn::mse(nn::detach(qb.e_rows), nn::detach(qb.zq_rows)).item() +
                          nn::mse(nn::detach(qh.e_rows), nn::detach(qh.zq_rows)).item();
            n_batches += 1;

            last_body_rows = *qb.e_rows.data;
            last_hand_rows = *qh.e_rows.data;
            last_rows = qb.e_rows.dim(0);
        }

        // reseed dead entries from encoder outputs seen in the last batch
        auto reseed = [&](Codebook& cb, const std::vector<double>& rows) {
            if (last_rows == 0) return;
            for (int64_t j = 0; j < cb.size(); ++j) {
                if (cb.usage[static_cast<size_t>(j)] > 0) continue;
                const int64_t pick = static_cast<int64_t>(
                    mix_seed(cfg.seed, 0xdead0000ull + static_cast<uint64_t>(epoch * 131071 + j)) %
                    static_cast<uint64_t>(last_rows));
                for (int64_t d = 0; d < cb.dim(); ++d)
                    (*cb.entries.data)[j * cb.dim() + d] = rows[static_cast<size_t>(pick * cb.dim() + d)];
            }
        };
        reseed(codec.body.codebook, last_body_rows);
        reseed(codec.hand.codebook, last_hand_rows);

        stats.recon_curve.push_back(recon_sum / static_cast<double>(n_batches));
        stats.commit_curve.push_back(commit_sum / static_cast<double>(n_batches));
        last_good = snapshot();
    }
    return stats;
}

}  // namespace t3m::codec
