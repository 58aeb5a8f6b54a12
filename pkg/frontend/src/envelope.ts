import type { Envelope, Offer, TemplateDoc } from './types.js';

export function newMessageId(prefix = 'con'): string {
  return `${prefix}-${crypto.randomUUID()}`;
}

export function buildCreateEnvelope(offer: Offer, params: Record<string, string>): Envelope {
  return {
    messageId: newMessageId(),
    command: 'create',
    target: offer.target,
    payload: { offerId: offer.offerId, params },
  };
}

export function buildDeleteEnvelope(instanceId: string, target: string): Envelope {
  return {
    messageId: newMessageId(),
    command: 'delete',
    target,
    payload: { instanceId },
  };
}

export function buildTemplateRegister(doc: TemplateDoc): Envelope {
  return {
    messageId: newMessageId(),
    command: 'register',
    target: 'Template',
    payload: doc as unknown as Record<string, unknown>,
  };
}

export function buildTemplateRemove(templateId: string): Envelope {
  return {
    messageId: newMessageId(),
    command: 'remove',
    target: 'Template',
    payload: { templateId },
  };
}

/** Declared params with no usable value; blank and whitespace count as missing. */
export function missingParams(declared: string[], values: Record<string, string>): string[] {
  return declared.filter((name) => (values[name] ?? '').trim() === '');
}

export type Submission =
  | { kind: 'blocked'; missing: string[] }
  | { kind: 'dryRun'; envelope: Envelope; json: string }
  | { kind: 'submit'; envelope: Envelope };

/**
 * Decide what an instantiate form submit does. Dry-run still requires a
 * complete form so the shown envelope is the one a real submit would send.
 */
export function prepareSubmission(
  offer: Offer,
  declared: string[],
  values: Record<string, string>,
  dryRun: boolean,
): Submission {
  const missing = missingParams(declared, values);
  if (missing.length > 0) {
    return { kind: 'blocked', missing };
  }
  const params: Record<string, string> = {};
  for (const name of declared) {
    params[name] = (values[name] ?? '').trim();
  }
  const envelope = buildCreateEnvelope(offer, params);
  if (dryRun) {
    return { kind: 'dryRun', envelope, json: JSON.stringify(envelope, null, 2) };
  }
  return { kind: 'submit', envelope };
}
