#!/usr/bin/env python3
"""Calibration pilot behind the frozen acceptance constants.

The synthetic world is the 3-cluster plane with side-5 spacing (centers
scaled from the default side-6 triangle), unit spread, 200 samples per
class. Plain cross-entropy classifiers are the default 4x16 relu net
trained single-phase with Adam 1e-3 for 200 epochs (batch 64). Models with
batch-level loss terms use the two-phase protocol the acceptance gate
freezes: 100 CE epochs at 1e-3, then 100 fine-tune epochs at 3e-5 from the
shared pretrained net (seeds s and s+1) -- trained from scratch at full
rate the separation term drifts into unbounded feature amplification.

This script prints every quantity the acceptance margins freeze:
per-category AUROCs at the candidate shift degrees for the CE and full
objectives (5 seeds), ID test accuracy, residual singular masses,
confidence-curve endpoints, and the restricted + default sweep dry runs.
Rerun after any change to the generators, the objective, or the training
defaults, then re-freeze the constants in tests/test_acceptance.py.
"""

import numpy as np

import shiftscope as ss

SEEDS = [101, 102, 103, 104, 105]
ARCH = [2, 16, 16, 16, 16, 3]
CE_EPOCHS = 200
PRETRAIN_EPOCHS = 100
FINETUNE_EPOCHS = 100
FINETUNE_LR = 3e-5
N_EVAL = 400
SIDE = 5.0

CENTERS = ss.data.default_centers(3) * (SIDE / 6.0)
CFG_TRAIN = ss.SynthConfig(centers=CENTERS, seed=11)
CFG_TEST = ss.SynthConfig(centers=CENTERS, seed=12)

DIST_CFG = ss.LossConfig(w_dist=0.1, w_var=0.0, w_corr=0.0,
                         enable_dist=True, enable_entropy=False)


def train_single_phase(data, seed, loss_cfg, epochs=CE_EPOCHS):
    net0 = ss.init_net(ARCH, seed=seed)
    net, _ = ss.train(net0, data, loss_cfg, epochs=epochs, seed=seed)
    return net


def train_two_phase(data, seed, loss_cfg):
    net0 = ss.init_net(ARCH, seed=seed)
    base, _ = ss.train(net0, data, ss.LossConfig.ce_only(),
                       epochs=PRETRAIN_EPOCHS, seed=seed)
    net, _ = ss.train(base, data, loss_cfg,
                      ss.OptConfig(learning_rate=FINETUNE_LR),
                      epochs=FINETUNE_EPOCHS, seed=seed + 1)
    return net


def maha_for(net, fit_data):
    tr = ss.forward(net, fit_data.inputs)
    ids, feats = ss.select_layers(tr, "penultimate")
    return ss.fit_mahalanobis(feats, fit_data.labels, layer_ids=ids)


def mass_of(net, data):
    return ss.residual_singular_mass(ss.forward(net, data.inputs).penultimate)


def main():
    id_train = ss.gen_id(CFG_TRAIN)
    id_test = ss.gen_id(CFG_TEST)

    def sweep_train_fn(ds, cfg):
        return train_two_phase(ds, 7, cfg)

    print("== restricted sweep (l2 fixed at 0.1) selects l3 ==")
    restricted = ss.select_hyperparams(ss.SweepGrid(var_weights=(0.1,)),
                                       id_train, sweep_train_fn)
    print(f"  accepted {restricted.accepted} "
          f"(ce_acc {restricted.ce_accuracy:.4f}, "
          f"ref_mass {restricted.reference_mass:.1f})")
    w_var, w_corr = restricted.accepted
    full_cfg = ss.LossConfig(w_dist=0.1, w_var=w_var, w_corr=w_corr)

    ce_nets = [train_single_phase(id_train, s, ss.LossConfig.ce_only())
               for s in SEEDS]
    ce2p_nets = [train_two_phase(id_train, s, ss.LossConfig.ce_only())
                 for s in SEEDS]
    dist_nets = [train_two_phase(id_train, s, DIST_CFG) for s in SEEDS]
    full_nets = [train_two_phase(id_train, s, full_cfg) for s in SEEDS]

    print("== ID test accuracy (crit 6: |full - ce| <= 0.02) ==")
    for name, nets in (("ce", ce_nets), ("full", full_nets)):
        accs = [ss.accuracy(n, id_test) for n in nets]
        print(f"  {name:5s} mean {np.mean(accs):.4f} "
              f"per-seed {[round(a, 4) for a in accs]}")

    print("== residual singular mass (crit 7 direction probes) ==")
    for name, nets in (("ce-2p", ce2p_nets), ("ce+dist", dist_nets),
                       ("full", full_nets)):
        masses = [mass_of(n, id_train) for n in nets]
        print(f"  {name:8s} mean {np.mean(masses):8.1f} "
              f"per-seed {[round(m, 1) for m in masses]}")

    ladders = {1: [0.75, 1.0], 2: [3.0, 4.0, 6.0], 3: [1.5, 2.0, 3.0]}
    print("== per-category AUROC (5-seed means; crits 4 and 5) ==")
    for cat, deltas in ladders.items():
        for d in deltas:
            nas = ss.gen_nas(CFG_TRAIN, cat, d, N_EVAL, seed=77000 + cat)
            rows = {"ce-msp": [], "ce-maha": [], "full-maha": []}
            for net_ce, net_full in zip(ce_nets, full_nets):
                model = maha_for(net_ce, id_train)
                tr_i = ss.forward(net_ce, id_test.inputs)
                tr_n = ss.forward(net_ce, nas.inputs)
                rows["ce-msp"].append(ss.auroc(
                    ss.score_msp(tr_i.logits), ss.score_msp(tr_n.logits)))
                rows["ce-maha"].append(ss.auroc(
                    ss.score_mahalanobis_trace(model, tr_i),
                    ss.score_mahalanobis_trace(model, tr_n)))
                model = maha_for(net_full, id_train)
                tr_i = ss.forward(net_full, id_test.inputs)
                tr_n = ss.forward(net_full, nas.inputs)
                rows["full-maha"].append(ss.auroc(
                    ss.score_mahalanobis_trace(model, tr_i),
                    ss.score_mahalanobis_trace(model, tr_n)))
            print(f"  cat{cat} d={d:4.2f}  " + "  ".join(
                f"{k}={np.mean(v):.3f}+-{np.std(v):.3f}"
                for k, v in rows.items()))

    print("== confidence-curve endpoints (ce nets, crit 8) ==")
    for cat, dmax in ((1, 1.0), (2, 6.0)):
        seq = ss.gen_shift_sequence(CFG_TRAIN, cat, [0.0, dmax / 2, dmax],
                                    N_EVAL, seed=88000 + cat)
        start = [ss.confidence_curve(n, seq)[0][1] for n in ce_nets]
        end = [ss.confidence_curve(n, seq)[-1][1] for n in ce_nets]
        print(f"  cat {cat}: msp(0) mean {np.mean(start):.5f}  "
              f"msp({dmax}) mean {np.mean(end):.5f}  end-start per seed "
              f"{[round(e - s, 5) for s, e in zip(start, end)]}")

    print("== default 4x5 sweep dry run (crit 9) ==")
    result = ss.select_hyperparams(ss.SweepGrid(), id_train, sweep_train_fn)
    print(f"  accepted {result.accepted} ce_acc {result.ce_accuracy:.4f} "
          f"ce_mass {result.ce_mass:.1f} ref_mass {result.reference_mass:.1f}")
    for rec in result.records[:4]:
        print(f"    l2={rec.w_var:<6g} l3={rec.w_corr:<7g} "
              f"hm={rec.harmonic_mean:9.5f} mass={rec.residual_mass:9.1f} "
              f"acc={rec.accuracy:.4f} {rec.verdict}")


if __name__ == "__main__":
    main()
