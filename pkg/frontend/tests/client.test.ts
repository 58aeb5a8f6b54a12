import { describe, expect, it } from 'vitest';

import { GatewayClient, GatewayError } from '../src/client.js';
import type { InstanceDoc, Offer, Reply, TemplateDoc } from '../src/types.js';
import { fakeFetch, fixture, jsonResponse } from './helpers.js';

// Contract tests: every response below was recorded from a live gateway,
// so these assert the client against the real wire format.

const BASE = 'http://gw.test';

function clientWith(
  handler: Parameters<typeof fakeFetch>[0],
  token?: string,
): { client: GatewayClient; calls: ReturnType<typeof fakeFetch>['calls'] } {
  const { impl, calls } = fakeFetch(handler);
  const client = new GatewayClient({ baseUrl: BASE, token, fetchImpl: impl });
  return { client, calls };
}

describe('searchOffers', () => {
  it('encodes filters as the gateway query parameters', async () => {
    const offers = fixture<Offer[]>('offers_xl_berlin.json');
    const { client, calls } = clientWith(() => jsonResponse(offers));

    const result = await client.searchOffers({
      minClass: 'XL',
      nearLat: 52.52,
      nearLon: 13.405,
      radiusKm: 100,
    });

    expect(calls[0].url).toBe(`${BASE}/offers?minClass=XL&nearLat=52.52&nearLon=13.405&radiusKm=100`);
    expect(result.map((o) => o.offerId)).toEqual(['beta-berlin-xl']);
  });

  it('hits bare /offers when no filters are set', async () => {
    const { client, calls } = clientWith(() => jsonResponse([]));
    await client.searchOffers();
    expect(calls[0].url).toBe(`${BASE}/offers`);
  });

  it('preserves the gateway ranking exactly', async () => {
    const offers = fixture<Offer[]>('offers_wide.json');
    const { client } = clientWith(() => jsonResponse(offers));
    const result = await client.searchOffers({ minClass: 'XL' });
    expect(result.map((o) => o.offerId)).toEqual(offers.map((o) => o.offerId));
  });

  it('does not reorder even a badly sorted response', async () => {
    const scrambled = [...fixture<Offer[]>('offers_wide.json')].reverse();
    const { client } = clientWith(() => jsonResponse(scrambled));
    const result = await client.searchOffers({});
    expect(result.map((o) => o.offerId)).toEqual(scrambled.map((o) => o.offerId));
  });
});

describe('auth header', () => {
  it('sends the bearer token once set', async () => {
    const { client, calls } = clientWith(() => jsonResponse([]), 'secret-1');
    await client.searchOffers();
    expect(calls[0].headers['Authorization']).toBe('Bearer secret-1');
  });

  it('omits the header without a token', async () => {
    const { client, calls } = clientWith(() => jsonResponse([]));
    await client.searchOffers();
    expect(calls[0].headers['Authorization']).toBeUndefined();
  });

  it('drops the header again when the token is cleared', async () => {
    const { client, calls } = clientWith(() => jsonResponse([]), 'secret-1');
    client.setToken(null);
    await client.searchOffers();
    expect(calls[0].headers['Authorization']).toBeUndefined();
  });
});

describe('submit', () => {
  it('posts the envelope verbatim and returns the accepted reply', async () => {
    const reply = fixture<Reply>('create_accepted.json');
    const { client, calls } = clientWith(() => jsonResponse(reply));

    const envelope = {
      messageId: 'con-1',
      command: 'create',
      target: 'VirtualMachine',
      payload: { offerId: 'beta-berlin-xl', params: { instanceName: 'console-1' } },
    };
    const result = await client.submit(envelope);

    expect(calls[0].url).toBe(`${BASE}/messages`);
    expect(calls[0].method).toBe('POST');
    expect(calls[0].headers['Content-Type']).toBe('application/json');
    expect(calls[0].body).toEqual(envelope);
    expect(result.status).toBe('accepted');
    expect(result.resultPayload?.['instanceId']).toBe('i-7aa1aae334aa');
  });

  it('surfaces a 422 rejection with the gateway reason', async () => {
    const recorded = fixture<{ status: number; body: unknown }>('create_rejected.json');
    const { client } = clientWith(() => jsonResponse(recorded.body, recorded.status));

    const err = await client
      .submit({ messageId: 'con-2', command: 'create', target: 'VirtualMachine', payload: {} })
      .then(() => null)
      .catch((e: unknown) => e);

    expect(err).toBeInstanceOf(GatewayError);
    const ge = err as GatewayError;
    expect(ge.status).toBe(422);
    expect(ge.code).toBe('NoOfferMatched');
    expect(ge.message).toContain('nothing in the catalog satisfies');
  });

  it('passes the InUse conflict through verbatim', async () => {
    const recorded = fixture<{ status: number; body: { error: string; detail: string } }>(
      'template_remove_inuse.json',
    );
    const { client } = clientWith(() => jsonResponse(recorded.body, recorded.status));

    const err = await client
      .submit({ messageId: 'con-3', command: 'remove', target: 'Template', payload: { templateId: 'beta-berlin-xl' } })
      .catch((e: unknown) => e);

    const ge = err as GatewayError;
    expect(ge.status).toBe(409);
    expect(ge.code).toBe('InUse');
    expect(ge.message).toBe(recorded.body.detail);
  });

  it('passes a CycleDetected conflict through verbatim', async () => {
    const detail = 'template loop-a: chain loops back to loop-a';
    const { client } = clientWith(() => jsonResponse({ error: 'CycleDetected', detail }, 409));

    const err = await client.importTemplates([]).catch((e: unknown) => e);

    const ge = err as GatewayError;
    expect(ge.code).toBe('CycleDetected');
    expect(ge.message).toBe(detail);
  });
});

describe('instances and replies', () => {
  it('reads an instance document', async () => {
    const doc = fixture<InstanceDoc>('instance_running.json');
    const { client, calls } = clientWith(() => jsonResponse(doc));
    const result = await client.getInstance(doc.instanceId);
    expect(calls[0].url).toBe(`${BASE}/instances/${doc.instanceId}`);
    expect(result.state).toBe('RUNNING');
    expect(result.providerRef).toBe('beta/1');
    expect(result.history.map((h) => h.state)).toEqual(['REQUESTED', 'PROVISIONING', 'RUNNING']);
  });

  it('lists instances, optionally filtered by state', async () => {
    const docs = fixture<InstanceDoc[]>('instances_list.json');
    const { client, calls } = clientWith(() => jsonResponse(docs));
    await client.listInstances('RUNNING');
    expect(calls[0].url).toBe(`${BASE}/instances?state=RUNNING`);
  });

  it('returns the terminal reply when one exists', async () => {
    const reply = fixture<Reply>('reply_completed.json');
    const { client } = clientWith(() => jsonResponse(reply));
    const result = await client.getReply('fix-c1');
    expect(result?.status).toBe('completed');
    expect(result?.resultPayload?.['state']).toBe('RUNNING');
  });

  it('maps a 404 reply to null while the request is pending', async () => {
    const { client } = clientWith(() =>
      jsonResponse({ error: 'NotFound', detail: 'no terminal reply for message x' }, 404),
    );
    expect(await client.getReply('x')).toBeNull();
  });
});

describe('templates', () => {
  it('round-trips the export document list', async () => {
    const docs = fixture<TemplateDoc[]>('templates_export.json');
    const { client, calls } = clientWith(() => jsonResponse(docs));
    const result = await client.exportTemplates();
    expect(calls[0].url).toBe(`${BASE}/templates/export`);
    expect(result).toHaveLength(docs.length);
    expect(result.find((t) => t.templateId === 'vm-xl-eu')?.declaredParams).toEqual([
      'instanceName',
      'zone',
    ]);
  });
});

describe('failure modes', () => {
  it('wraps a refused connection as a NetworkError', async () => {
    const { client } = clientWith(() => {
      throw new TypeError('fetch failed');
    });
    const err = await client.health().catch((e: unknown) => e);
    const ge = err as GatewayError;
    expect(ge).toBeInstanceOf(GatewayError);
    expect(ge.status).toBe(0);
    expect(ge.code).toBe('NetworkError');
  });

  it('tolerates a non-JSON error body', async () => {
    const { client } = clientWith(() => new Response('<html>bad gateway</html>', { status: 502 }));
    const err = await client.health().catch((e: unknown) => e);
    const ge = err as GatewayError;
    expect(ge.status).toBe(502);
    expect(ge.code).toBe('HttpError');
  });
});
