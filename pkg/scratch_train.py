import time

import numpy as np

from projrom import dyn, loss, net, rom, train


def coarse_ics():
    vals = np.array([-1.0, -1 / 3, -1 / 9, 1 / 9, 1 / 3, 1.0])
    g = np.meshgrid(vals, vals, vals, indexing="ij")
    return np.stack([m.ravel() for m in g], axis=1)


def make_data(seed=0):
    sysn = dyn.noack_system()
    rng = np.random.default_rng(seed)
    train_ics = coarse_ics()
    valid_ics = rng.uniform(-1, 1, (216, 3))
    t0 = time.time()
    train_trajs = [dyn.rk4(sysn, ic, None, (0, 20), 0.1) for ic in train_ics]
    valid_trajs = [dyn.rk4(sysn, ic, None, (0, 20), 0.1) for ic in valid_ics]
    print("traj gen", time.time() - t0)
    return sysn, train_trajs, valid_trajs


if __name__ == "__main__":
    sysn, train_trajs, valid_trajs = make_data()
    train_states = np.concatenate([t.states for t in train_trajs])
    valid_states = np.concatenate([t.states for t in valid_trajs])
    print("train states", train_states.shape)

    spec = loss.LossSpec("rec")
    data = train.DataSplit(train=train_states, valid=valid_states)
    model0 = net.AutoencoderParams.random((2, 3, 3, 3, 3, 3), seed=0)
    cfg = train.TrainConfig(epochs=60, seed=0)
    t0 = time.time()
    res = train.train_session(model0, spec, data, cfg)
    el = time.time() - t0
    print(f"60 epochs in {el:.1f}s -> {el/60*300:.0f}s for 300")
    print("first/last valid:", res.curves[0].valid, res.best_valid, "best epoch", res.best_epoch)
    print("manifold err:", rom.manifold_recon_error(res.model))
    pe = rom.rom_pred_error(res.model, sysn, "enc", valid_trajs[:50])
    print("pred err (50 valid):", pe)
