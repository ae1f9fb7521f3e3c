//! JSON form of tensor trains:
//!
//! ```json
//! {"kind": "ttvector" | "ttmatrix", "n": 3, "phys_dims": [2, 2, 2],
//!  "rank_profile": [1, 2, 2, 1],
//!  "cores": [{"shape": [1, 2, 2], "re": [...], "im": [...]}, ...]}
//! ```
//!
//! Vector cores have shape `[left, s, right]`, operator cores
//! `[left, s, l, right]`; data is flattened row-major. Floats are written in
//! shortest round-trip form, so parsing returns the same bits. Unitary MPOs
//! add a `"c"` field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::UnitaryMPO;
use crate::linalg::C64;
use crate::tt::{Core, TTMatrix, TTVector};

#[derive(Serialize, Deserialize)]
struct CoreJson {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TTJson {
    kind: String,
    n: usize,
    phys_dims: Vec<usize>,
    rank_profile: Vec<usize>,
    cores: Vec<CoreJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    c: Option<f64>,
}

fn core_json(core: &Core, shape: Vec<usize>) -> CoreJson {
    CoreJson {
        shape,
        re: core.data.iter().map(|z| z.re).collect(),
        im: core.data.iter().map(|z| z.im).collect(),
    }
}

fn core_from_json(cj: &CoreJson, matrix: bool) -> Result<Core> {
    let (left, phys, right) = match (matrix, cj.shape.as_slice()) {
        (false, &[a, s, b]) => (a, s, b),
        (true, &[a, s, l, b]) if s == l => (a, s * l, b),
        _ => return Err(Error::Malformed(format!("bad core shape {:?}", cj.shape))),
    };
    if cj.re.len() != cj.im.len() {
        return Err(Error::Malformed("re and im lengths differ".into()));
    }
    let data = cj.re.iter().zip(&cj.im).map(|(&r, &i)| C64::new(r, i)).collect();
    Core::new(left, phys, right, data)
}

fn check_header(doc: &TTJson, kind: &str, n: usize, phys_dims: &[usize], ranks: &[usize]) -> Result<()> {
    if doc.kind != kind {
        return Err(Error::Malformed(format!("expected kind {kind:?}, found {:?}", doc.kind)));
    }
    if doc.n != n || doc.phys_dims != phys_dims || doc.rank_profile != ranks {
        return Err(Error::Malformed("header does not match the cores".into()));
    }
    Ok(())
}

fn vector_doc(x: &TTVector) -> TTJson {
    TTJson {
        kind: "ttvector".into(),
        n: x.n(),
        phys_dims: x.phys_dims(),
        rank_profile: x.rank_profile().bonds,
        cores: x.cores().iter().map(|c| core_json(c, vec![c.left, c.phys, c.right])).collect(),
        c: None,
    }
}

fn matrix_doc(a: &TTMatrix) -> TTJson {
    TTJson {
        kind: "ttmatrix".into(),
        n: a.n(),
        phys_dims: a.phys_dims().to_vec(),
        rank_profile: a.rank_profile().bonds,
        cores: a
            .cores()
            .iter()
            .zip(a.phys_dims())
            .map(|(c, &d)| core_json(c, vec![c.left, d, d, c.right]))
            .collect(),
        c: None,
    }
}

fn matrix_from_doc(doc: &TTJson) -> Result<TTMatrix> {
    let cores = doc.cores.iter().map(|c| core_from_json(c, true)).collect::<Result<Vec<_>>>()?;
    let a = TTMatrix::new(cores)?;
    check_header(doc, "ttmatrix", a.n(), a.phys_dims(), &a.rank_profile().bonds)?;
    Ok(a)
}

pub fn vector_to_json(x: &TTVector) -> Result<String> {
    Ok(serde_json::to_string(&vector_doc(x))?)
}

pub fn vector_from_json(text: &str) -> Result<TTVector> {
    let doc: TTJson = serde_json::from_str(text)?;
    let cores = doc.cores.iter().map(|c| core_from_json(c, false)).collect::<Result<Vec<_>>>()?;
    let x = TTVector::new(cores)?;
    check_header(&doc, "ttvector", x.n(), &x.phys_dims(), &x.rank_profile().bonds)?;
    Ok(x)
}

pub fn matrix_to_json(a: &TTMatrix) -> Result<String> {
    Ok(serde_json::to_string(&matrix_doc(a))?)
}

pub fn matrix_from_json(text: &str) -> Result<TTMatrix> {
    let doc: TTJson = serde_json::from_str(text)?;
    matrix_from_doc(&doc)
}

pub fn unitary_mpo_to_json(u: &UnitaryMPO) -> Result<String> {
    let mut doc = matrix_doc(&u.mpo);
    doc.c = Some(u.c);
    Ok(serde_json::to_string(&doc)?)
}

pub fn unitary_mpo_from_json(text: &str) -> Result<UnitaryMPO> {
    let doc: TTJson = serde_json::from_str(text)?;
    let c = doc.c.ok_or_else(|| Error::Malformed("missing \"c\"".into()))?;
    UnitaryMPO::new(matrix_from_doc(&doc)?, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn laplace_roundtrip() {
        let a = zoo::laplace_mpo(4).unwrap();
        let text = matrix_to_json(&a).unwrap();
        assert!(text.contains("\"kind\":\"ttmatrix\""));
        assert_eq!(matrix_from_json(&text).unwrap(), a);
    }

    #[test]
    fn kind_is_checked() {
        let x = TTVector::basis_state(&[0, 1, 1]).unwrap();
        let text = vector_to_json(&x).unwrap();
        assert_eq!(vector_from_json(&text).unwrap(), x);
        assert!(matches!(matrix_from_json(&text), Err(Error::Malformed(_))));
    }

    #[test]
    fn inconsistent_header_rejected() {
        let x = TTVector::basis_state(&[0, 1]).unwrap();
        let text = vector_to_json(&x).unwrap().replace("\"n\":2", "\"n\":3");
        assert!(matches!(vector_from_json(&text), Err(Error::Malformed(_))));
    }
}
