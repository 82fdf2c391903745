/**
 * Client-side mirror of the server's design-document validation.
 *
 * The design editor runs these checks on every edit and refuses to submit
 * while any violation is present, so the server's 422 path is a backstop
 * rather than the primary guard. Rules and messages match the server:
 * attribute names are [A-Za-z][A-Za-z0-9_]*, continuous bounds are finite
 * with lower strictly below upper and an integer dims >= 1, discrete values
 * are a nonempty strictly increasing list of integers.
 */

import type { DesignDoc, Quantification } from './api'

export interface Violation {
  attribute: string | null;
  message: string;
}

const NAME_PATTERN = /^[A-Za-z][A-Za-z0-9_]*$/;

export function validateDesign(doc: DesignDoc): Violation[] {
  const violations: Violation[] = [];
  if (doc.component_kind !== 'observation' && doc.component_kind !== 'action') {
    violations.push({ attribute: null, message: 'component_kind must be observation or action' });
  }
  if (doc.attributes.length === 0) {
    violations.push({ attribute: null, message: 'design choice must have at least one attribute' });
  }
  const seen = new Set<string>();
  for (const attr of doc.attributes) {
    const name = attr.name;
    const label = name === '' ? null : name;
    if (!NAME_PATTERN.test(name)) {
      violations.push({
        attribute: label,
        message: `name '${name}' must match [A-Za-z][A-Za-z0-9_]*`,
      });
    } else if (seen.has(name)) {
      violations.push({ attribute: name, message: 'duplicate attribute name' });
    } else {
      seen.add(name);
    }
    violations.push(...validateQuant(label, attr.quantification));
  }
  return violations;
}

function validateQuant(attribute: string | null, quant: Quantification): Violation[] {
  const out: Violation[] = [];
  if (quant.kind === 'continuous') {
    if (typeof quant.lower !== 'number' || typeof quant.upper !== 'number') {
      out.push({ attribute, message: 'continuous bounds must be numbers' });
      return out;
    }
    if (!Number.isFinite(quant.lower) || !Number.isFinite(quant.upper)) {
      out.push({ attribute, message: 'continuous bounds must be finite' });
    } else if (!(quant.lower < quant.upper)) {
      out.push({ attribute, message: 'lower must be strictly below upper' });
    }
    if (!Number.isInteger(quant.dims) || quant.dims < 1) {
      out.push({ attribute, message: 'dims must be an integer >= 1' });
    }
  } else if (quant.kind === 'discrete') {
    const values = quant.values;
    if (values.length === 0) {
      out.push({ attribute, message: 'discrete values must be nonempty' });
      return out;
    }
    if (!values.every((v) => Number.isInteger(v))) {
      out.push({ attribute, message: 'discrete values must be integers' });
      return out;
    }
    if (values.some((v, i) => i > 0 && v <= values[i - 1])) {
      out.push({ attribute, message: 'discrete values must be strictly increasing' });
    }
  } else {
    out.push({ attribute, message: 'unknown quantification kind' });
  }
  return out;
}

/**
 * Space classification used for session list rows: Discrete when every
 * quantification in both components is discrete, Continuous when every one
 * is continuous, Hybrid otherwise. Same rule the server applies when it
 * reports metrics for a finished session.
 */
export function classifySpaces(observation: DesignDoc, action: DesignDoc): string {
  const kinds = [...observation.attributes, ...action.attributes].map(
    (attr) => attr.quantification.kind,
  );
  if (kinds.every((k) => k === 'discrete')) {
    return 'Discrete';
  }
  if (kinds.every((k) => k === 'continuous')) {
    return 'Continuous';
  }
  return 'Hybrid';
}
