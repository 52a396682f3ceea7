use super::Tensor;

/// Stable, named enumeration of every trainable tensor in a model.
///
/// Gradients are carried in a value of the same type as the model (see
/// [`zeros_like`]), so model and gradient enumerate in the same order.
pub trait Parameterized {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor));
    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn named_params<P: Parameterized + ?Sized>(p: &P) -> Vec<(String, &Tensor)> {
    let mut out = Vec::new();
    p.visit_params("", &mut |name, t| out.push((name, t)));
    out
}

pub fn param_count<P: Parameterized + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit_params("", &mut |_, t| n += t.len());
    n
}

pub fn flatten<P: Parameterized + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::new();
    p.visit_params("", &mut |_, t| out.extend_from_slice(t.as_slice()));
    out
}

pub fn zeros_like<P: Parameterized + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_params_mut("", &mut |_, t| t.fill(0.0));
    z
}

/// `dst += scale · src`, parameter by parameter.
pub fn add_scaled<P: Parameterized>(dst: &mut P, src: &P, scale: f64) {
    let src: Vec<&Tensor> = named_params(src).into_iter().map(|(_, t)| t).collect();
    let mut i = 0;
    dst.visit_params_mut("", &mut |_, t| {
        for (a, b) in t.as_mut_slice().iter_mut().zip(src[i].as_slice()) {
            *a += scale * b;
        }
        i += 1;
    });
}

pub fn scale_params<P: Parameterized>(p: &mut P, scale: f64) {
    p.visit_params_mut("", &mut |_, t| t.scale(scale));
}

/// Applies `f` to the scalar at flat index `index` (enumeration order).
pub fn with_scalar_mut<P: Parameterized + ?Sized>(p: &mut P, index: usize, f: impl FnOnce(&mut f64)) {
    let mut offset = 0;
    let mut f = Some(f);
    p.visit_params_mut("", &mut |_, t| {
        if index >= offset && index < offset + t.len() {
            if let Some(g) = f.take() {
                g(&mut t.as_mut_slice()[index - offset]);
            }
        }
        offset += t.len();
    });
}

/// True when any scalar of the parameter named by `prefix` is nonzero.
pub fn any_nonzero_under<P: Parameterized + ?Sized>(p: &P, prefix: &str) -> bool {
    named_params(p)
        .into_iter()
        .filter(|(name, _)| name == prefix || name.starts_with(&format!("{prefix}.")))
        .any(|(_, t)| t.as_slice().iter().any(|&x| x != 0.0))
}
