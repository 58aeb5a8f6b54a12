import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import type { GatewayClient } from '../src/client.js';
import { watchInstances } from '../src/poll.js';
import type { InstanceDoc } from '../src/types.js';

function instance(state: string): InstanceDoc {
  return {
    instanceId: 'i-1',
    offerId: 'o-1',
    target: 'VirtualMachine',
    state,
    providerId: 'beta',
    providerRef: state === 'RUNNING' ? 'beta/1' : null,
    history: [],
  };
}

function clientReturning(batches: InstanceDoc[][]): GatewayClient {
  let i = 0;
  return {
    listInstances: vi.fn(async () => batches[Math.min(i++, batches.length - 1)]),
  } as unknown as GatewayClient;
}

beforeEach(() => vi.useFakeTimers());
afterEach(() => vi.useRealTimers());

describe('watchInstances', () => {
  it('polls on a two second cadence until everything settles', async () => {
    const client = clientReturning([
      [instance('PROVISIONING')],
      [instance('PROVISIONING')],
      [instance('RUNNING')],
    ]);
    const seen: string[] = [];
    watchInstances(client, (docs) => seen.push(docs[0].state), () => {});

    await vi.advanceTimersByTimeAsync(0);
    expect(seen).toEqual(['PROVISIONING']);

    await vi.advanceTimersByTimeAsync(1999);
    expect(seen).toHaveLength(1);

    await vi.advanceTimersByTimeAsync(1);
    expect(seen).toEqual(['PROVISIONING', 'PROVISIONING']);

    await vi.advanceTimersByTimeAsync(2000);
    expect(seen).toEqual(['PROVISIONING', 'PROVISIONING', 'RUNNING']);

    // Settled: the interval is gone, no further requests happen.
    await vi.advanceTimersByTimeAsync(20_000);
    expect(client.listInstances).toHaveBeenCalledTimes(3);
  });

  it('never overlaps requests when the gateway is slow', async () => {
    let release: (docs: InstanceDoc[]) => void = () => {};
    const slow = {
      listInstances: vi.fn(
        () => new Promise<InstanceDoc[]>((resolve) => (release = resolve)),
      ),
    } as unknown as GatewayClient;

    const handle = watchInstances(slow, () => {}, () => {});
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(9000);
    expect(slow.listInstances).toHaveBeenCalledTimes(1);

    release([instance('RUNNING')]);
    await vi.advanceTimersByTimeAsync(0);
    handle.stop();
  });

  it('stops delivering after stop() even with a response in flight', async () => {
    let release: (docs: InstanceDoc[]) => void = () => {};
    const slow = {
      listInstances: vi.fn(
        () => new Promise<InstanceDoc[]>((resolve) => (release = resolve)),
      ),
    } as unknown as GatewayClient;

    const seen: InstanceDoc[][] = [];
    const handle = watchInstances(slow, (docs) => seen.push(docs), () => {});
    await vi.advanceTimersByTimeAsync(0);
    handle.stop();
    release([instance('RUNNING')]);
    await vi.advanceTimersByTimeAsync(0);
    expect(seen).toEqual([]);
  });

  it('reports fetch failures and keeps polling', async () => {
    let failures = 0;
    const flaky = {
      listInstances: vi.fn(async () => {
        if (failures++ === 0) throw new Error('boom');
        return [instance('RUNNING')];
      }),
    } as unknown as GatewayClient;

    const errors: unknown[] = [];
    const seen: InstanceDoc[][] = [];
    watchInstances(flaky, (docs) => seen.push(docs), (err) => errors.push(err));

    await vi.advanceTimersByTimeAsync(0);
    expect(errors).toHaveLength(1);
    await vi.advanceTimersByTimeAsync(2000);
    expect(seen).toHaveLength(1);
  });

  it('treats an empty table as settled', async () => {
    const client = clientReturning([[]]);
    watchInstances(client, () => {}, () => {});
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(10_000);
    expect(client.listInstances).toHaveBeenCalledTimes(1);
  });
});
