#!/usr/bin/env node
/** Command-line front end.
 *
 *   gridbridge extract <image> <out.srfg>      feature grid to disk
 *   gridbridge ground <payload.json> <image> <out.pgm>
 *                                              submit a payload to the
 *                                              segmenter endpoint
 *   gridbridge selftest                        assert preprocessing constants
 */

import { backboneFromEnv } from './backbone.js';
import { extractToFile } from './extract.js';
import { readImage, writeMaskPgm } from './image.js';
import { readPayload } from './payload.js';
import { selfTest } from './preprocess.js';
import { HttpSession, SessionError, groundWithPayload, maskToGray } from './sam3.js';

function usage(): never {
    console.error(
        'usage: gridbridge extract <image> <out.srfg>\n' +
        '       gridbridge ground <payload.json> <image> <out.pgm>\n' +
        '       gridbridge selftest'
    );
    process.exit(2);
}

async function main(argv: string[]): Promise<number> {
    const [cmd, ...rest] = argv;
    if (cmd === 'extract') {
        if (rest.length !== 2) usage();
        const backbone = backboneFromEnv();
        if (backbone.name.startsWith('stub')) {
            console.error(
                'note: using the deterministic stub backbone; set BACKBONE_CMD to bridge a real model'
            );
        }
        extractToFile(rest[0], rest[1], backbone);
        console.log(`feature grid written to ${rest[1]} (backbone: ${backbone.name})`);
        return 0;
    }
    if (cmd === 'ground') {
        if (rest.length !== 3) usage();
        const endpoint = process.env.SAM3_ENDPOINT;
        if (!endpoint) {
            console.error('error: SAM3_ENDPOINT is not set; cannot reach a segmenter');
            return 1;
        }
        const payload = readPayload(rest[0]);
        const image = readImage(rest[1]);
        try {
            const mask = await groundWithPayload(new HttpSession(endpoint), payload, image);
            writeMaskPgm(maskToGray(mask), rest[2]);
        } catch (err) {
            if (err instanceof SessionError) {
                console.error(`error: ${err.message}`);
                return 1;
            }
            throw err;
        }
        console.log(`mask written to ${rest[2]}`);
        return 0;
    }
    if (cmd === 'selftest') {
        const failures = selfTest();
        if (failures.length === 0) {
            console.log('selftest: preprocessing constants and grid geometry OK');
            return 0;
        }
        for (const f of failures) console.error(`selftest failure: ${f}`);
        return 1;
    }
    usage();
}

main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (err) => {
        console.error(`error: ${err instanceof Error ? err.message : err}`);
        process.exit(1);
    }
);
