//! Network parameters and optimizer state in a `PMSN1` container.

use std::path::Path;

use num_complex::Complex;
use pmsn_core::neuron::{LearnableMask, LifParams, PmsnParams};
use pmsn_core::train::{Block, Dense, Moments, Network, NetworkSpec, NeuronLayer, OptimState};
use pmsn_core::{Precision, Real};
use serde_json::json;

use crate::container::{Container, TensorData};
use crate::error::{Error, Result};

fn reals<T: Real>(v: &[T]) -> TensorData {
    match T::PRECISION {
        Precision::Single => TensorData::F32(v.iter().map(|x| x.as_f64() as f32).collect()),
        Precision::Double => TensorData::F64(v.iter().map(|x| x.as_f64()).collect()),
    }
}

fn complexes<T: Real>(v: &[Complex<T>]) -> TensorData {
    let flat: Vec<T> = v.iter().flat_map(|c| [c.re, c.im]).collect();
    reals(&flat)
}

fn push_params<T: Real>(c: &mut Container, prefix: &str, p: &PmsnParams<T>) {
    let (f, m) = (p.features, p.modes);
    c.push(format!("{prefix}.lambda_dt"), vec![f, m, 2], complexes(&p.lambda_dt));
    c.push(format!("{prefix}.phi_c"), vec![f, m, 2], complexes(&p.phi_c));
    c.push(format!("{prefix}.phi_s"), vec![f, m, 2], complexes(&p.phi_s));
    c.push(format!("{prefix}.dt"), vec![f], reals(&p.dt));
    c.push(format!("{prefix}.gamma_n"), vec![f], reals(&p.gamma_n));
    c.push(format!("{prefix}.theta"), vec![1], reals(&[p.theta]));
    c.push(format!("{prefix}.alpha_out"), vec![1], reals(&[p.alpha_out]));
    c.push(
        format!("{prefix}.pairing"),
        vec![m],
        TensorData::U64(p.pairing.iter().map(|&x| x as u64).collect()),
    );
    let mask = p.learnable;
    c.push(
        format!("{prefix}.learnable"),
        vec![4],
        TensorData::U64(
            [mask.lambda_dt, mask.phi_c, mask.phi_s, mask.gamma_n]
                .map(u64::from)
                .to_vec(),
        ),
    );
}

/// Reads a named tensor, checking its shape.
fn take<'a>(c: &'a Container, name: &str, shape: &[usize], path: &Path) -> Result<&'a TensorData> {
    let t = c
        .get(name)
        .ok_or_else(|| Error::format(path, format!("missing tensor `{name}`")))?;
    if t.shape != shape {
        return Err(Error::format(
            path,
            format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape),
        ));
    }
    Ok(&t.data)
}

fn read_reals<T: Real>(c: &Container, name: &str, shape: &[usize], path: &Path) -> Result<Vec<T>> {
    Ok(take(c, name, shape, path)?.to_f64().into_iter().map(T::lit).collect())
}

fn read_complex<T: Real>(c: &Container, name: &str, f: usize, m: usize, path: &Path) -> Result<Vec<Complex<T>>> {
    let v = read_reals::<T>(c, name, &[f, m, 2], path)?;
    Ok(v.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect())
}

fn read_u64(c: &Container, name: &str, shape: &[usize], path: &Path) -> Result<Vec<u64>> {
    match take(c, name, shape, path)? {
        TensorData::U64(v) => Ok(v.clone()),
        _ => Err(Error::format(path, format!("tensor `{name}` must be u64"))),
    }
}

fn read_params<T: Real>(c: &Container, prefix: &str, f: usize, m: usize, path: &Path) -> Result<PmsnParams<T>> {
    let mask = read_u64(c, &format!("{prefix}.learnable"), &[4], path)?;
    let p = PmsnParams {
        features: f,
        modes: m,
        lambda_dt: read_complex(c, &format!("{prefix}.lambda_dt"), f, m, path)?,
        phi_c: read_complex(c, &format!("{prefix}.phi_c"), f, m, path)?,
        phi_s: read_complex(c, &format!("{prefix}.phi_s"), f, m, path)?,
        dt: read_reals(c, &format!("{prefix}.dt"), &[f], path)?,
        gamma_n: read_reals(c, &format!("{prefix}.gamma_n"), &[f], path)?,
        theta: read_reals(c, &format!("{prefix}.theta"), &[1], path)?[0],
        alpha_out: read_reals(c, &format!("{prefix}.alpha_out"), &[1], path)?[0],
        pairing: read_u64(c, &format!("{prefix}.pairing"), &[m], path)?
            .into_iter()
            .map(|x| x as usize)
            .collect(),
        learnable: LearnableMask {
            lambda_dt: mask[0] != 0,
            phi_c: mask[1] != 0,
            phi_s: mask[2] != 0,
            gamma_n: mask[3] != 0,
        },
    };
    p.validate()
        .map_err(|e| Error::format(path, format!("{prefix}: {e}")))?;
    Ok(p)
}

/// A single PMSN layer as a stand-alone parameter file.
pub fn params_to_container<T: Real>(p: &PmsnParams<T>) -> Container {
    let mut c = Container::new(json!({
        "kind": "pmsn-layer",
        "precision": T::PRECISION.as_str(),
        "features": p.features,
        "modes": p.modes,
    }));
    push_params(&mut c, "layer", p);
    c
}

pub fn params_from_container<T: Real>(c: &Container, path: &Path) -> Result<PmsnParams<T>> {
    let dim = |k: &str| {
        c.meta
            .get(k)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .ok_or_else(|| Error::format(path, format!("header meta lacks `{k}`")))
    };
    if c.meta.get("kind").and_then(|v| v.as_str()) != Some("pmsn-layer") {
        return Err(Error::format(path, "not a PMSN layer parameter file"));
    }
    read_params(c, "layer", dim("features")?, dim("modes")?, path)
}

/// Training state: parameters, normalization statistics, optimizer moments,
/// and `meta` (epoch counter, configuration, ...).
pub fn checkpoint_to_container<T: Real>(net: &Network<T>, opt: &OptimState, meta: serde_json::Value) -> Container {
    let mut c = Container::new(json!({
        "kind": "checkpoint",
        "precision": T::PRECISION.as_str(),
        "run": meta,
    }));
    for (i, b) in net.blocks.iter().enumerate() {
        let d = &b.dense;
        c.push(
            format!("block{i}.dense.weight"),
            vec![d.outputs, d.inputs],
            reals(&d.weight),
        );
        c.push(format!("block{i}.dense.bias"), vec![d.outputs], reals(&d.bias));
        if let Some(n) = &b.norm {
            c.push(format!("block{i}.norm.gamma"), vec![n.features], reals(&n.gamma));
            c.push(format!("block{i}.norm.beta"), vec![n.features], reals(&n.beta));
            c.push(
                format!("block{i}.norm.running_mean"),
                vec![n.features],
                reals(&n.running_mean),
            );
            c.push(
                format!("block{i}.norm.running_var"),
                vec![n.features],
                reals(&n.running_var),
            );
        }
        match &b.neuron {
            NeuronLayer::Pmsn(p) => push_params(&mut c, &format!("block{i}.pmsn"), p),
            NeuronLayer::Lif(p) => c.push(format!("block{i}.lif"), vec![3], reals(&[p.alpha, p.theta, p.v_rest])),
        }
    }
    let h = &net.head;
    c.push("head.weight", vec![h.outputs, h.inputs], reals(&h.weight));
    c.push("head.bias", vec![h.outputs], reals(&h.bias));
    c.push("optim.step", vec![1], TensorData::U64(vec![opt.step]));
    for (k, s) in opt.slots.iter().enumerate() {
        c.push(format!("optim.m.{k}"), vec![s.m.len()], TensorData::F64(s.m.clone()));
        c.push(format!("optim.v.{k}"), vec![s.v.len()], TensorData::F64(s.v.clone()));
    }
    c
}

/// Restores a network built from `spec` and its optimizer state.
pub fn checkpoint_from_container<T: Real>(
    c: &Container,
    spec: NetworkSpec,
    path: &Path,
) -> Result<(Network<T>, OptimState)> {
    if c.meta.get("kind").and_then(|v| v.as_str()) != Some("checkpoint") {
        return Err(Error::format(path, "not a training checkpoint"));
    }
    let template = Network::<T>::new(spec.clone())?;
    let mut blocks = Vec::with_capacity(template.blocks.len());
    for (i, tb) in template.blocks.iter().enumerate() {
        let d = &tb.dense;
        let dense = Dense::from_parts(
            d.inputs,
            d.outputs,
            read_reals(c, &format!("block{i}.dense.weight"), &[d.outputs, d.inputs], path)?,
            read_reals(c, &format!("block{i}.dense.bias"), &[d.outputs], path)?,
        )?;
        let norm = match &tb.norm {
            Some(n) => {
                let mut n = n.clone();
                let f = n.features;
                n.gamma = read_reals(c, &format!("block{i}.norm.gamma"), &[f], path)?;
                n.beta = read_reals(c, &format!("block{i}.norm.beta"), &[f], path)?;
                n.running_mean = read_reals(c, &format!("block{i}.norm.running_mean"), &[f], path)?;
                n.running_var = read_reals(c, &format!("block{i}.norm.running_var"), &[f], path)?;
                Some(n)
            }
            None => None,
        };
        let neuron = match &tb.neuron {
            NeuronLayer::Pmsn(p) => {
                NeuronLayer::Pmsn(read_params(c, &format!("block{i}.pmsn"), p.features, p.modes, path)?)
            }
            NeuronLayer::Lif(_) => {
                let v = read_reals::<T>(c, &format!("block{i}.lif"), &[3], path)?;
                NeuronLayer::Lif(LifParams {
                    alpha: v[0],
                    theta: v[1],
                    v_rest: v[2],
                })
            }
        };
        blocks.push(Block { dense, norm, neuron });
    }
    let h = &template.head;
    let head = Dense::from_parts(
        h.inputs,
        h.outputs,
        read_reals(c, "head.weight", &[h.outputs, h.inputs], path)?,
        read_reals(c, "head.bias", &[h.outputs], path)?,
    )?;
    let net = Network::from_parts(spec, blocks, head)?;
    let step = read_u64(c, "optim.step", &[1], path)?[0];
    let mut slots = Vec::new();
    while let (Some(m), Some(v)) = (
        c.get(&format!("optim.m.{}", slots.len())),
        c.get(&format!("optim.v.{}", slots.len())),
    ) {
        slots.push(Moments {
            m: m.data.to_f64(),
            v: v.data.to_f64(),
        });
    }
    Ok((net, OptimState { step, slots }))
}
