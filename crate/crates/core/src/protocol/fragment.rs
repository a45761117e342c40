use super::{ProtocolError, HEADER_LEN};

/// Splits `size` payload bytes into MTU-sized fragments, each of which
/// carries its own copy of the header. Returns the payload length of each
/// fragment.
pub fn fragment_payload(size: u32, mtu: u32) -> Result<Vec<u32>, ProtocolError> {
    let header = HEADER_LEN as u32;
    if mtu <= header {
        return Err(ProtocolError::MtuTooSmall { mtu, header });
    }
    let chunk = mtu - header;
    let full = size / chunk;
    let rest = size % chunk;
    let mut out = vec![chunk; full as usize];
    if rest > 0 {
        out.push(rest);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let f = fragment_payload(8334, 1500).unwrap();
        assert_eq!(f.len(), 6);
        assert_eq!(f[..5], [1492; 5]);
        assert_eq!(f[5], 8334 - 5 * 1492);
        assert_eq!(fragment_payload(13, 1500).unwrap(), vec![13]);
        assert!(fragment_payload(0, 1500).unwrap().is_empty());
        assert_eq!(fragment_payload(1492, 1500).unwrap(), vec![1492]);
        assert!(fragment_payload(10, 8).is_err());
    }
}
